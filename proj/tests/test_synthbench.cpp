#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "aqtc/dataset_io.hpp"
#include "aqtc/embedding.hpp"
#include "aqtc/errors.hpp"
#include "aqtc/synthbench.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace aqtc {
namespace {

std::string first_word(const std::string& s) { return s.substr(0, s.find(' ')); }

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

TEST(Generator, ByteIdenticalAcrossRuns) {
  SynthConfig c;
  c.tasks = 2;
  c.buttons = 4;
  c.functions = 3;
  c.candidates_per_step = 6;
  c.seed = 0;
  const auto a = test::scratch_dir("gen_det_a"), b = test::scratch_dir("gen_det_b");
  generate_dataset(c, a);
  generate_dataset(c, b);
  const auto ta = tree_bytes(a), tb = tree_bytes(b);
  EXPECT_EQ(ta.size(), tb.size());
  EXPECT_TRUE(ta == tb);
  EXPECT_TRUE(ta.contains("generator.json"));
  EXPECT_TRUE(ta.contains("task_000/meta.json"));
  EXPECT_TRUE(ta.contains("task_001/images/panel.png"));
  EXPECT_TRUE(ta.contains("task_001/frames/000001.png"));
  // Task i does not depend on how many tasks are generated.
  SynthConfig more = c;
  more.tasks = 5;
  EXPECT_EQ(generate_task(more, 1).task, generate_task(c, 1).task);
}

TEST(Generator, DefaultCorpusStepHistogram) {
  // Frozen from one generation of the default config (seed 0).
  SynthConfig c;
  int qa = 0, multi = 0;
  std::map<int, int> hist;
  for (int i = 0; i < c.tasks; ++i) {
    for (const auto& q : generate_task(c, i).task.qas) {
      ++qa;
      ++hist[static_cast<int>(q.steps.size())];
      multi += q.steps.size() >= 2;
    }
  }
  EXPECT_EQ(qa, 500);
  EXPECT_EQ(hist, (std::map<int, int>{{1, 84}, {2, 166}, {3, 190}, {4, 60}}));
  EXPECT_GE(static_cast<double>(multi) / qa, 0.70);
}

void check_task_properties(const GeneratedTask& g, const SynthConfig& c) {
  const auto& t = g.task;
  EXPECT_TRUE(validate_task(t).empty());
  EXPECT_EQ(static_cast<int>(t.buttons.size()), c.buttons);
  EXPECT_EQ(t.frames.size(), 3 * t.script.size());
  EXPECT_EQ(g.frames.size(), t.frames.size());
  EXPECT_TRUE(check_oracle(t, g.meta).empty());
  std::set<int> all_buttons;
  for (const auto& b : t.buttons) all_buttons.insert(b.button_id);

  // One coloured rectangle per button on a uniform background.
  for (const auto& b : t.buttons) {
    const auto* centre = g.panel.at((b.box.x1 + b.box.x2) / 2, (b.box.y1 + b.box.y2) / 2);
    const auto* corner = g.panel.at(b.box.x1, b.box.y1);
    EXPECT_TRUE(std::equal(centre, centre + 3, corner));
    EXPECT_FALSE(centre[0] == 96 && centre[1] == 96 && centre[2] == 96);
  }
  for (std::size_t a = 0; a < t.buttons.size(); ++a)
    for (std::size_t b = a + 1; b < t.buttons.size(); ++b) {
      const Box &p = t.buttons[a].box, &q = t.buttons[b].box;
      EXPECT_TRUE(p.x2 <= q.x1 || q.x2 <= p.x1 || p.y2 <= q.y1 || q.y2 <= p.y1);
    }

  for (const auto& qa : t.qas) {
    const auto& oracle = g.meta.qas.at(qa.qa_id);
    ASSERT_EQ(oracle.buttons.size(), qa.steps.size());
    for (std::size_t i = 0; i < qa.steps.size(); ++i) {
      const auto& step = qa.steps[i];
      EXPECT_EQ(static_cast<int>(step.candidates.size()), c.candidates_per_step);
      const auto& right = step.candidates[static_cast<std::size_t>(step.correct)];
      EXPECT_EQ(right.button_ref, oracle.buttons[i]);
      std::set<int> covered;
      int same_verb = 0;
      for (std::size_t j = 0; j < step.candidates.size(); ++j) {
        covered.insert(*step.candidates[j].button_ref);
        if (static_cast<int>(j) != step.correct && first_word(step.candidates[j].text) == first_word(right.text))
          ++same_verb;
      }
      EXPECT_EQ(covered, all_buttons);
      EXPECT_GE(same_verb, 1) << qa.qa_id << " step " << i;
      // The narration line of the step names the button's colour and is positive.
      const auto& line = t.script.at(static_cast<std::size_t>(oracle.script_lines[i]));
      EXPECT_EQ(line.find("do not"), std::string::npos);
      EXPECT_NE(line.find(" button to "), std::string::npos);
      if (c.history_dependent && i > 0) {
        EXPECT_EQ(step.candidates, qa.steps[i - 1].candidates);
      }
    }
  }
}

TEST(Generator, TaskProperties) {
  SynthConfig c;
  c.tasks = 12;
  for (int i = 0; i < c.tasks; ++i) check_task_properties(generate_task(c, i), c);
  SynthConfig wide = c;
  wide.buttons = 8;
  wide.candidates_per_step = 12;
  wide.functions = 3;
  for (int i = 0; i < 4; ++i) check_task_properties(generate_task(wide, i), wide);
}

TEST(Generator, HistoryDependentCorpus) {
  SynthConfig c;
  c.tasks = 12;
  c.history_dependent = true;
  for (int i = 0; i < c.tasks; ++i) {
    const auto g = generate_task(c, i);
    check_task_properties(g, c);
    bool multi = false;
    for (const auto& qa : g.task.qas) multi |= qa.steps.size() >= 2;
    EXPECT_TRUE(multi);
    const auto dev = make_device(c, derive_seed(c.seed, static_cast<std::uint64_t>(i)));
    EXPECT_TRUE(dev.history_dependent);
  }
}

TEST(Generator, RoundTripsThroughLoader) {
  SynthConfig c;
  c.tasks = 3;
  c.seed = 9;
  const auto dir = test::scratch_dir("gen_roundtrip");
  const auto summary = generate_dataset(c, dir);
  EXPECT_EQ(summary.tasks, 3);
  const auto ids = list_task_ids(dir);
  ASSERT_EQ(ids.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto g = generate_task(c, i);
    const auto loaded = load_task(dir / g.task.task_id);
    EXPECT_EQ(loaded, rebased(g.task, dir / g.task.task_id));
    EXPECT_EQ(read_png(dir / g.task.task_id / "images" / "panel.png"), g.panel);
    const auto meta = read_oracle(dir / g.task.task_id);
    EXPECT_EQ(meta.to_json(), g.meta.to_json());
  }
  const auto gen = read_json_file(dir / "generator.json");
  EXPECT_EQ(gen.at("config"), c.to_json());
  EXPECT_EQ(gen.at("counts"), summary.to_json());
}

TEST(Oracle, AnswersAndTamperDetection) {
  SynthConfig c;
  c.tasks = 1;
  const auto g = generate_task(c, 0);
  bool saw_single = false, saw_two = false;
  for (const auto& qa : g.task.qas) {
    const auto ans = oracle_answer(g.meta, qa.qa_id);
    ASSERT_EQ(ans.size(), qa.steps.size());
    for (std::size_t i = 0; i < ans.size(); ++i) {
      EXPECT_EQ(ans[i].first, static_cast<int>(i));
      EXPECT_EQ(ans[i].second, qa.steps[i].correct);
    }
    saw_single |= ans.size() == 1;
    if (qa.steps.size() == 2) {
      // Correct candidates reference the oracle's buttons in order.
      saw_two = true;
      const auto& o = g.meta.qas.at(qa.qa_id);
      EXPECT_EQ(qa.steps[0].candidates[qa.steps[0].correct].button_ref, o.buttons[0]);
      EXPECT_EQ(qa.steps[1].candidates[qa.steps[1].correct].button_ref, o.buttons[1]);
    }
  }
  EXPECT_TRUE(saw_single || saw_two);
  EXPECT_THROW(oracle_answer(g.meta, "nope"), UnknownQA);

  auto tampered = g.task;
  auto& step = tampered.qas[0].steps[0];
  step.correct = (step.correct + 1) % static_cast<int>(step.candidates.size());
  EXPECT_FALSE(check_oracle(tampered, g.meta).empty());
}

TEST(Config, ValidationAndJson) {
  SynthConfig ok;
  EXPECT_NO_THROW(ok.validate());
  auto bad = [](auto mutate) {
    SynthConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](SynthConfig& c) { c.buttons = 2; });
  bad([](SynthConfig& c) { c.buttons = 9; });
  bad([](SynthConfig& c) { c.max_steps = 5; });
  bad([](SynthConfig& c) { c.functions = 0; });
  bad([](SynthConfig& c) { c.tasks = 0; });
  bad([](SynthConfig& c) { c.candidates_per_step = c.buttons; });
  bad([](SynthConfig& c) { c.candidates_per_step = 13; });
  EXPECT_THROW(SynthConfig::from_json({{"tasks", 3}, {"colour", "red"}}), ConfigError);
  const auto c = SynthConfig::from_json({{"tasks", 3}, {"history_dependent", true}});
  EXPECT_EQ(c.tasks, 3);
  EXPECT_TRUE(c.history_dependent);
  EXPECT_EQ(SynthConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Probe, SignalExistsAndShuffleControl) {
  SynthConfig c;
  c.tasks = 40;
  std::vector<std::pair<TaskInstance, OracleMeta>> tasks;
  for (int i = 0; i < c.tasks; ++i) {
    auto g = generate_task(c, i);
    tasks.emplace_back(std::move(g.task), std::move(g.meta));
  }
  const SyntheticBackend backend;
  const auto real = learnability_probe(tasks, backend);
  const auto shuffled = learnability_probe(tasks, backend, 1);
  EXPECT_GE(real.pass_rate(), 0.9);
  // With a random index treated as correct the probe falls to chance level.
  EXPECT_LT(shuffled.pass_rate(), 0.6);
  EXPECT_EQ(real.steps, shuffled.steps);

  c.history_dependent = true;
  std::vector<std::pair<TaskInstance, OracleMeta>> hist;
  for (int i = 0; i < 20; ++i) {
    auto g = generate_task(c, i);
    hist.emplace_back(std::move(g.task), std::move(g.meta));
  }
  EXPECT_GE(learnability_probe(hist, backend).pass_rate(), 0.9);

  int steps = 0;
  for (const auto& qa : tasks.front().first.qas) steps += static_cast<int>(qa.steps.size());
  EXPECT_EQ(learnability_probe({tasks.front()}, backend).steps, steps);
}

}  // namespace
}  // namespace aqtc
