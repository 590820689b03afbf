#include "aqtc/synthbench.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "aqtc/dataset_io.hpp"
#include "aqtc/embedding.hpp"
#include "aqtc/errors.hpp"
#include "aqtc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aqtc {

namespace {

constexpr int kPanel = 224;
constexpr int kGridCells = 3;
constexpr int kFramesPerSentence = 3;
constexpr std::uint8_t kBackground = 96;

struct PaletteEntry {
  const char* name;
  std::array<std::uint8_t, 3> rgb;
};

constexpr PaletteEntry kPalette[] = {
    {"red", {220, 30, 30}},     {"green", {30, 180, 60}},  {"blue", {30, 60, 220}},   {"yellow", {235, 220, 40}},
    {"white", {245, 245, 245}}, {"black", {15, 15, 15}},   {"orange", {245, 140, 20}}, {"purple", {130, 40, 160}},
};

constexpr const char* kVerbs[] = {"press", "push", "hold", "tap", "turn", "slide"};
constexpr const char* kActs[] = {"start", "stop", "set", "change", "open", "close", "raise", "lower", "reset", "adjust"};
constexpr const char* kObjects[] = {"timer", "power", "temperature", "mode",    "light", "fan",    "clock",
                                    "lock",  "door",  "water",       "heat",    "speed", "volume", "program",
                                    "menu",  "steam", "grill",       "defrost", "rinse", "spin"};
constexpr const char* kStems[] = {"How do I ", "How to ", "What to do to "};

constexpr int kPhraseCount = static_cast<int>(std::size(kActs) * std::size(kObjects));
constexpr int kVerbCount = static_cast<int>(std::size(kVerbs));

// Step counts are drawn from this bag (truncated to max_steps); 5 of 6 draws
// are multi-step.
constexpr int kStepBag[] = {1, 2, 2, 3, 3, 4};
constexpr int kHistoryStepBag[] = {2, 2, 3, 3, 4};

template <class T, std::size_t N>
const T& pick(Rng& rng, const T (&arr)[N]) {
  return arr[rng.below(N)];
}

std::string task_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task_%03d", index);
  return buf;
}

std::string frame_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", k);
  return buf;
}

std::string candidate_text(const SynthAction& a) {
  return a.verb + " <button" + std::to_string(a.button) + "> to " + a.phrase;
}

void draw_ring(Raster& r, const Box& b, int width, std::array<std::uint8_t, 3> rgb) {
  const Box outer{std::max(b.x1 - width, 0), std::max(b.y1 - width, 0), std::min(b.x2 + width, r.width),
                  std::min(b.y2 + width, r.height)};
  for (int y = outer.y1; y < outer.y2; ++y)
    for (int x = outer.x1; x < outer.x2; ++x) {
      if (b.contains(x, y)) continue;
      auto* p = r.at(x, y);
      p[0] = rgb[0];
      p[1] = rgb[1];
      p[2] = rgb[2];
    }
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(std::string("synth config: '") + key + "' must be an integer");
  return j[key].get<int>();
}

}  // namespace

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("synth config: " + msg);
  };
  check(tasks >= 1 && tasks <= 100000, "tasks must be in [1, 100000]");
  check(buttons >= 3 && buttons <= 8, "buttons must be in [3, 8]");
  check(functions >= 1 && functions <= 20, "functions must be in [1, 20]");
  check(max_steps >= 1 && max_steps <= 4, "max_steps must be in [1, 4]");
  check(candidates_per_step > buttons && candidates_per_step <= 12,
        "candidates_per_step must be in [buttons + 1, 12]");
  check(!history_dependent || max_steps >= 2, "history_dependent needs max_steps >= 2");
  const int phrases_needed = functions * (max_steps + 1) + 2 * buttons + kVerbCount + candidates_per_step;
  check(phrases_needed <= kPhraseCount, "too many functions for the phrase inventory");
}

json SynthConfig::to_json() const {
  return {{"tasks", tasks},
          {"buttons", buttons},
          {"functions", functions},
          {"max_steps", max_steps},
          {"candidates_per_step", candidates_per_step},
          {"history_dependent", history_dependent},
          {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  static const std::set<std::string> known = {"tasks",     "buttons", "functions",         "max_steps",
                                              "candidates_per_step", "history_dependent", "seed"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("synth config: unknown key '" + k + "'");
  SynthConfig c;
  c.tasks = get_int(j, "tasks", c.tasks);
  c.buttons = get_int(j, "buttons", c.buttons);
  c.functions = get_int(j, "functions", c.functions);
  c.max_steps = get_int(j, "max_steps", c.max_steps);
  c.candidates_per_step = get_int(j, "candidates_per_step", c.candidates_per_step);
  if (j.contains("history_dependent")) {
    if (!j["history_dependent"].is_boolean()) throw ConfigError("synth config: 'history_dependent' must be a boolean");
    c.history_dependent = j["history_dependent"].get<bool>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ConfigError("synth config: 'seed' must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

DeviceSpec make_device(const SynthConfig& config, std::uint64_t task_seed) {
  config.validate();
  Rng rng(task_seed);
  DeviceSpec d;
  d.history_dependent = config.history_dependent;

  std::vector<int> colors(std::size(kPalette));
  std::vector<int> cells(kGridCells * kGridCells);
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  rng.shuffle(colors);
  rng.shuffle(cells);
  for (int b = 0; b < config.buttons; ++b) {
    PanelButton pb;
    pb.button_id = b;
    pb.color = kPalette[colors[b]].name;
    pb.rgb = kPalette[colors[b]].rgb;
    const int cx = cells[b] % kGridCells, cy = cells[b] / kGridCells;
    const int x0 = cx * kPanel / kGridCells, x1 = (cx + 1) * kPanel / kGridCells;
    const int y0 = cy * kPanel / kGridCells, y1 = (cy + 1) * kPanel / kGridCells;
    pb.box = {x0 + 8 + static_cast<int>(rng.below(10)), y0 + 8 + static_cast<int>(rng.below(10)),
              x1 - 8 - static_cast<int>(rng.below(10)), y1 - 8 - static_cast<int>(rng.below(10))};
    d.buttons.push_back(pb);
  }

  std::vector<std::string> phrases;
  for (const char* a : kActs)
    for (const char* o : kObjects) phrases.push_back(std::string(a) + " the " + o);
  rng.shuffle(phrases);
  std::size_t next_phrase = 0;
  auto phrase = [&] { return phrases.at(next_phrase++); };

  for (int f = 0; f < config.functions; ++f) {
    SynthFunction fn;
    fn.goal = phrase();
    int len = config.history_dependent ? pick(rng, kHistoryStepBag) : pick(rng, kStepBag);
    len = std::min(len, config.max_steps);
    if (config.history_dependent) {
      // Distinct buttons and one shared verb: the other steps of the same
      // function double as same-verb wrong options.
      len = std::min(len, config.buttons);
      std::vector<int> order(static_cast<std::size_t>(config.buttons));
      for (int b = 0; b < config.buttons; ++b) order[static_cast<std::size_t>(b)] = b;
      rng.shuffle(order);
      const std::string verb = pick(rng, kVerbs);
      for (int k = 0; k < len; ++k) fn.steps.push_back({order[static_cast<std::size_t>(k)], verb, phrase()});
    } else {
      for (int k = 0; k < len; ++k)
        fn.steps.push_back({static_cast<int>(rng.below(static_cast<std::size_t>(config.buttons))), pick(rng, kVerbs), phrase()});
    }
    d.functions.push_back(std::move(fn));
  }

  for (int b = 0; b < config.buttons; ++b)
    for (int k = 0; k < 2; ++k) d.decoys.push_back({b, pick(rng, kVerbs), phrase()});
  std::set<std::string> decoy_verbs;
  for (const auto& a : d.decoys) decoy_verbs.insert(a.verb);
  for (const auto& fn : d.functions)
    for (const auto& s : fn.steps)
      if (decoy_verbs.insert(s.verb).second)
        d.decoys.push_back({static_cast<int>(rng.below(static_cast<std::size_t>(config.buttons))), s.verb, phrase()});
  while (static_cast<int>(d.decoys.size()) < config.candidates_per_step - 1)
    d.decoys.push_back({static_cast<int>(rng.below(static_cast<std::size_t>(config.buttons))), pick(rng, kVerbs), phrase()});
  return d;
}

TaskInstance rebased(const TaskInstance& task, const fs::path& dir) {
  TaskInstance t = task;
  for (auto& f : t.frames) f = dir / f;
  for (auto& [id, ref] : t.user_images) ref.path = dir / ref.path;
  return t;
}

GeneratedTask generate_task(const SynthConfig& config, int index) {
  config.validate();
  const std::uint64_t task_seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  const DeviceSpec d = make_device(config, task_seed);
  Rng rng(derive_seed(task_seed, 1));

  GeneratedTask g;
  g.task.task_id = task_name(index);
  g.meta.task_id = g.task.task_id;
  g.panel = Raster(kPanel, kPanel, kBackground, kBackground, kBackground);
  for (const auto& b : d.buttons) {
    g.panel.fill_box(b.box, b.rgb[0], b.rgb[1], b.rgb[2]);
    g.task.buttons.push_back({b.button_id, "panel.png", b.box});
  }
  g.task.user_images["panel.png"] = {fs::path("images") / "panel.png", kPanel, kPanel};

  // Narration blocks: one per function (its steps in order) and one per
  // decoy, in shuffled order.
  struct Line {
    std::string text;
    int button;
    bool negated;
  };
  std::vector<std::vector<Line>> blocks;
  std::vector<std::size_t> block_of_function;
  for (const auto& fn : d.functions) {
    std::vector<Line> lines;
    const auto n = fn.steps.size();
    for (std::size_t k = 0; k < n; ++k) {
      std::string ord;
      if (n > 1) ord = k == 0 ? "first " : (k + 1 == n ? "finally " : "then ");
      const auto& s = fn.steps[k];
      lines.push_back({ord + s.verb + " the " + d.buttons[static_cast<std::size_t>(s.button)].color + " button to " + s.phrase,
                       s.button, false});
    }
    blocks.push_back(std::move(lines));
  }
  for (const auto& a : d.decoys)
    blocks.push_back({{"do not " + a.verb + " the " + d.buttons[static_cast<std::size_t>(a.button)].color +
                           " button to " + a.phrase,
                       a.button, true}});
  std::vector<std::size_t> order(blocks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> first_line(blocks.size());
  std::vector<Line> script;
  for (auto bi : order) {
    first_line[bi] = static_cast<int>(script.size());
    for (const auto& l : blocks[bi]) script.push_back(l);
  }

  int frame_no = 0;
  for (const auto& l : script) {
    g.task.script.push_back(l.text);
    Raster frame = g.panel;
    const Box& box = d.buttons[static_cast<std::size_t>(l.button)].box;
    if (l.negated)
      draw_ring(frame, box, 5, {0, 200, 200});
    else
      draw_ring(frame, box, 5, {255, 0, 255});
    for (int k = 0; k < kFramesPerSentence; ++k) {
      g.task.frames.push_back(fs::path("frames") / frame_name(++frame_no));
      g.frames.push_back(frame);
    }
  }

  const int n_cands = config.candidates_per_step;
  auto decoys_on = [&](int button, const std::vector<int>& taken) {
    std::vector<int> out;
    for (std::size_t i = 0; i < d.decoys.size(); ++i)
      if (d.decoys[i].button == button && std::find(taken.begin(), taken.end(), static_cast<int>(i)) == taken.end())
        out.push_back(static_cast<int>(i));
    return out;
  };
  auto free_decoys = [&](const std::vector<int>& taken, const std::string* verb) {
    std::vector<int> out;
    for (std::size_t i = 0; i < d.decoys.size(); ++i)
      if (std::find(taken.begin(), taken.end(), static_cast<int>(i)) == taken.end() &&
          (verb == nullptr || d.decoys[i].verb == *verb))
        out.push_back(static_cast<int>(i));
    return out;
  };
  auto choose = [&](const std::vector<int>& pool) { return pool.at(rng.below(pool.size())); };

  for (std::size_t f = 0; f < d.functions.size(); ++f) {
    const auto& fn = d.functions[f];
    QASample qa;
    qa.qa_id = "q" + std::to_string(f);
    qa.question = std::string(pick(rng, kStems)) + fn.goal + "?";
    OracleQA oq;

    if (d.history_dependent) {
      std::vector<SynthAction> set(fn.steps.begin(), fn.steps.end());
      std::vector<int> taken;
      for (int b = 0; b < config.buttons; ++b) {
        if (std::any_of(fn.steps.begin(), fn.steps.end(), [&](const SynthAction& s) { return s.button == b; })) continue;
        taken.push_back(choose(decoys_on(b, taken)));
      }
      while (static_cast<int>(set.size() + taken.size()) < n_cands) taken.push_back(choose(free_decoys(taken, nullptr)));
      for (int i : taken) set.push_back(d.decoys[static_cast<std::size_t>(i)]);
      std::vector<std::size_t> perm(set.size());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      rng.shuffle(perm);
      StepSpec shared;
      for (auto p : perm) shared.candidates.push_back({candidate_text(set[p]), set[p].button});
      for (std::size_t k = 0; k < fn.steps.size(); ++k) {
        StepSpec s = shared;
        s.correct = static_cast<int>(std::find(perm.begin(), perm.end(), k) - perm.begin());
        qa.steps.push_back(std::move(s));
      }
    } else {
      for (const auto& step : fn.steps) {
        std::vector<int> taken;
        for (int b = 0; b < config.buttons; ++b)
          if (b != step.button) taken.push_back(choose(decoys_on(b, taken)));
        const bool verb_shared = std::any_of(taken.begin(), taken.end(), [&](int i) {
          return d.decoys[static_cast<std::size_t>(i)].verb == step.verb;
        });
        if (!verb_shared) taken.push_back(choose(free_decoys(taken, &step.verb)));
        while (static_cast<int>(taken.size()) < n_cands - 1) taken.push_back(choose(free_decoys(taken, nullptr)));
        std::vector<SynthAction> set{step};
        for (int i : taken) set.push_back(d.decoys[static_cast<std::size_t>(i)]);
        std::vector<std::size_t> perm(set.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        StepSpec s;
        for (auto p : perm) s.candidates.push_back({candidate_text(set[p]), set[p].button});
        s.correct = static_cast<int>(std::find(perm.begin(), perm.end(), std::size_t{0}) - perm.begin());
        qa.steps.push_back(std::move(s));
      }
    }
    for (std::size_t k = 0; k < fn.steps.size(); ++k) {
      oq.buttons.push_back(fn.steps[k].button);
      oq.correct.push_back(qa.steps[k].correct);
      oq.script_lines.push_back(first_line[f] + static_cast<int>(k));
    }
    g.meta.qas[qa.qa_id] = std::move(oq);
    g.task.qas.push_back(std::move(qa));
  }
  return g;
}

json OracleMeta::to_json() const {
  json qs = json::object();
  for (const auto& [id, q] : qas)
    qs[id] = {{"buttons", q.buttons}, {"correct", q.correct}, {"script_lines", q.script_lines}};
  return {{"task_id", task_id}, {"qas", qs}};
}

OracleMeta OracleMeta::from_json(const json& j) {
  try {
    OracleMeta m;
    m.task_id = j.at("task_id").get<std::string>();
    for (const auto& [id, q] : j.at("qas").items()) {
      OracleQA oq;
      oq.buttons = q.at("buttons").get<std::vector<int>>();
      oq.correct = q.at("correct").get<std::vector<int>>();
      oq.script_lines = q.at("script_lines").get<std::vector<int>>();
      m.qas[id] = std::move(oq);
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("meta.json: ") + e.what());
  }
}

json GeneratorSummary::to_json() const {
  json steps_h = json::object();
  for (const auto& [k, v] : step_hist) steps_h[std::to_string(k)] = v;
  json cand_h = json::object();
  for (const auto& [k, v] : candidate_hist) cand_h[std::to_string(k)] = v;
  return {{"tasks", tasks},
          {"qa", qa},
          {"steps", steps},
          {"video_seconds", video_seconds},
          {"step_histogram", steps_h},
          {"candidate_histogram", cand_h}};
}

void write_generated_task(const fs::path& dir, const GeneratedTask& g) {
  fs::remove_all(dir);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "frames");
  write_task_text(dir, g.task);
  write_png(dir / "images" / "panel.png", g.panel);
  for (std::size_t i = 0; i < g.frames.size(); ++i) write_png(dir / g.task.frames[i], g.frames[i]);
  write_text_file_atomic(dir / "meta.json", g.meta.to_json().dump(2) + "\n");
}

GeneratorSummary generate_dataset(const SynthConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  GeneratorSummary sum;
  for (int i = 0; i < config.tasks; ++i) {
    const auto g = generate_task(config, i);
    write_generated_task(out / g.task.task_id, g);
    ++sum.tasks;
    sum.video_seconds += static_cast<int>(g.task.frames.size());
    for (const auto& qa : g.task.qas) {
      ++sum.qa;
      ++sum.step_hist[static_cast<int>(qa.steps.size())];
      for (const auto& s : qa.steps) {
        ++sum.steps;
        ++sum.candidate_hist[static_cast<int>(s.candidates.size())];
      }
    }
  }
  write_text_file_atomic(out / "generator.json",
                         json{{"config", config.to_json()}, {"counts", sum.to_json()}}.dump(2) + "\n");
  return sum;
}

OracleMeta read_oracle(const fs::path& task_dir) {
  if (!fs::exists(task_dir / "meta.json")) throw MissingFile("meta.json");
  return OracleMeta::from_json(read_json_file(task_dir / "meta.json"));
}

std::vector<std::pair<int, int>> oracle_answer(const OracleMeta& meta, const std::string& qa_id) {
  const auto it = meta.qas.find(qa_id);
  if (it == meta.qas.end()) throw UnknownQA(qa_id);
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < it->second.correct.size(); ++i) out.emplace_back(static_cast<int>(i), it->second.correct[i]);
  return out;
}

std::vector<std::string> check_oracle(const TaskInstance& task, const OracleMeta& meta) {
  std::vector<std::string> out;
  for (const auto& qa : task.qas) {
    const auto it = meta.qas.find(qa.qa_id);
    if (it == meta.qas.end()) {
      out.push_back(qa.qa_id + ": not in oracle");
      continue;
    }
    const auto& want = it->second.correct;
    if (want.size() != qa.steps.size()) {
      out.push_back(qa.qa_id + ": oracle has " + std::to_string(want.size()) + " steps, qa.json has " +
                    std::to_string(qa.steps.size()));
      continue;
    }
    for (std::size_t i = 0; i < want.size(); ++i)
      if (want[i] != qa.steps[i].correct)
        out.push_back(qa.qa_id + " step " + std::to_string(i) + ": oracle " + std::to_string(want[i]) +
                      ", qa.json " + std::to_string(qa.steps[i].correct));
  }
  for (const auto& [id, q] : meta.qas)
    if (task.find_qa(id) == nullptr) out.push_back(id + ": in oracle but not in qa.json");
  return out;
}

json ProbeReport::to_json() const { return {{"steps", steps}, {"passed", passed}, {"pass_rate", pass_rate()}}; }

ProbeReport learnability_probe(const std::vector<std::pair<TaskInstance, OracleMeta>>& tasks,
                               const EmbeddingBackend& backend, std::optional<std::uint64_t> shuffle_seed) {
  ProbeReport r;
  Rng rng(shuffle_seed.value_or(0));
  auto cosine = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double d = a.norm() * b.norm();
    return d == 0.0 ? 0.0 : a.dot(b) / d;
  };
  for (const auto& [task, meta] : tasks) {
    for (const auto& qa : task.qas) {
      const auto& oq = meta.qas.at(qa.qa_id);
      for (std::size_t i = 0; i < qa.steps.size(); ++i) {
        const auto& step = qa.steps[i];
        const auto sentence = backend.embed_text(task.script.at(static_cast<std::size_t>(oq.script_lines.at(i))));
        const std::size_t n = step.candidates.size();
        const std::size_t gt = shuffle_seed ? rng.below(n) : static_cast<std::size_t>(step.correct);
        double wrong = 0.0, right = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double c =
              cosine(sentence, backend.embed_text(qa.question + " " + candidate_prompt(step.candidates[j])));
          if (j == gt)
            right = c;
          else
            wrong += c;
        }
        ++r.steps;
        if (right > wrong / static_cast<double>(n - 1)) ++r.passed;
      }
    }
  }
  return r;
}

ProbeReport learnability_probe(const fs::path& dataset, const EmbeddingBackend& backend,
                               std::optional<std::uint64_t> shuffle_seed) {
  std::vector<std::pair<TaskInstance, OracleMeta>> tasks;
  for (const auto& id : list_task_ids(dataset))
    tasks.emplace_back(load_task(dataset / id), read_oracle(dataset / id));
  return learnability_probe(tasks, backend, shuffle_seed);
}

}  // namespace aqtc
