#include "aqtc/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aqtc/errors.hpp"
#include "aqtc/raster.hpp"
#include "aqtc/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aqtc {

namespace {

constexpr const char* kButtonsHeader = "image,button_id,x1,y1,x2,y2";

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingFile(file.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int parse_int(const std::string& field, const std::string& where) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(field, &pos);
  } catch (const std::exception&) {
    throw SchemaError(where + ": '" + field + "' is not an integer");
  }
  if (pos != field.size()) throw SchemaError(where + ": '" + field + "' is not an integer");
  return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError("qa.json: " + where + " missing key '" + key + "'");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError("qa.json: " + where + "." + key + " must be a string");
  return v.get<std::string>();
}

}  // namespace

std::vector<fs::path> list_frame_files(const fs::path& frames_dir) {
  std::vector<std::pair<long, fs::path>> numbered;
  for (const auto& entry : fs::directory_iterator(frames_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); }))
      throw SchemaError("frames/" + entry.path().filename().string() + ": frame names must be numeric");
    numbered.emplace_back(std::stol(stem), entry.path());
  }
  std::sort(numbered.begin(), numbered.end());
  std::vector<fs::path> out;
  out.reserve(numbered.size());
  for (auto& [n, p] : numbered) out.push_back(std::move(p));
  return out;
}

std::vector<std::string> DatasetManifest::train_ids() const {
  std::vector<std::string> out;
  for (const auto& id : task_ids)
    if (split.at(id) == Split::kTrain) out.push_back(id);
  return out;
}

std::vector<std::string> DatasetManifest::val_ids() const {
  std::vector<std::string> out;
  for (const auto& id : task_ids)
    if (split.at(id) == Split::kVal) out.push_back(id);
  return out;
}

json DatasetStats::to_json() const {
  json per_task = json::array();
  for (const auto& t : tasks)
    per_task.push_back({{"task_id", t.task_id}, {"video_seconds", t.video_seconds}, {"qa_count", t.qa_count}});
  json steps = json::object();
  for (const auto& [k, v] : step_hist) steps[std::to_string(k)] = v;
  json cands = json::object();
  for (const auto& [k, v] : candidate_hist) cands[std::to_string(k)] = v;
  return {{"tasks", per_task},          {"total_video_seconds", total_video_seconds},
          {"total_qa", total_qa},       {"total_steps", total_steps},
          {"step_histogram", steps},    {"candidate_histogram", cands}};
}

TaskInstance load_task(const fs::path& dir) {
  for (const char* name : {"script.txt", "buttons.csv", "qa.json", "images", "frames"})
    if (!fs::exists(dir / name)) throw MissingFile(name);

  TaskInstance task;
  task.task_id = dir.filename().string();

  for (auto& line : split_lines(read_text(dir / "script.txt")))
    if (!line.empty()) task.script.push_back(std::move(line));

  for (const auto& entry : fs::directory_iterator(dir / "images")) {
    if (!entry.is_regular_file()) continue;
    ImageRef ref;
    ref.path = entry.path();
    std::tie(ref.width, ref.height) = png_size(entry.path());
    task.user_images.emplace(entry.path().filename().string(), std::move(ref));
  }

  task.frames = list_frame_files(dir / "frames");

  const auto rows = split_lines(read_text(dir / "buttons.csv"));
  if (rows.empty() || rows.front() != kButtonsHeader)
    throw SchemaError(std::string("buttons.csv line 1: header must be exactly '") + kButtonsHeader + "'");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const std::string where = "buttons.csv line " + std::to_string(i + 1);
    const auto f = split_csv_row(rows[i]);
    if (f.size() != 6) throw SchemaError(where + ": expected 6 fields, got " + std::to_string(f.size()));
    Button b;
    b.image_id = f[0];
    b.button_id = parse_int(f[1], where);
    b.box = {parse_int(f[2], where), parse_int(f[3], where), parse_int(f[4], where), parse_int(f[5], where)};
    task.buttons.push_back(std::move(b));
  }

  json qa;
  try {
    qa = json::parse(read_text(dir / "qa.json"));
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("qa.json: ") + e.what());
  }
  if (qa.contains("task_id") && qa["task_id"].is_string()) task.task_id = qa["task_id"].get<std::string>();
  const auto& questions = require(qa, "questions", "root");
  if (!questions.is_array()) throw SchemaError("qa.json: questions must be an array");
  for (std::size_t q = 0; q < questions.size(); ++q) {
    const std::string qw = "questions[" + std::to_string(q) + "]";
    QASample sample;
    sample.qa_id = require_string(questions[q], "id", qw);
    sample.question = require_string(questions[q], "text", qw);
    const auto& steps = require(questions[q], "steps", qw);
    if (!steps.is_array()) throw SchemaError("qa.json: " + qw + ".steps must be an array");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const std::string sw = qw + ".steps[" + std::to_string(i) + "]";
      StepSpec step;
      const auto& correct = require(steps[i], "correct", sw);
      if (!correct.is_number_integer()) throw SchemaError("qa.json: " + sw + ".correct must be an integer");
      step.correct = correct.get<int>();
      const auto& cands = require(steps[i], "candidates", sw);
      if (!cands.is_array()) throw SchemaError("qa.json: " + sw + ".candidates must be an array");
      for (std::size_t j = 0; j < cands.size(); ++j) {
        const std::string cw = sw + ".candidates[" + std::to_string(j) + "]";
        Candidate c;
        c.text = require_string(cands[j], "text", cw);
        const auto& button = require(cands[j], "button", cw);
        if (button.is_number_integer())
          c.button_ref = button.get<int>();
        else if (!button.is_null())
          throw SchemaError("qa.json: " + cw + ".button must be an integer or null");
        step.candidates.push_back(std::move(c));
      }
      sample.steps.push_back(std::move(step));
    }
    task.qas.push_back(std::move(sample));
  }

  if (auto violations = validate_task(task); !violations.empty()) throw ValidationError(std::move(violations));
  return task;
}

void write_task_text(const fs::path& dir, const TaskInstance& task) {
  fs::create_directories(dir);
  std::string script;
  for (const auto& s : task.script) script += s + "\n";
  write_text_file_atomic(dir / "script.txt", script);

  std::string csv = std::string(kButtonsHeader) + "\n";
  for (const auto& b : task.buttons)
    csv += b.image_id + "," + std::to_string(b.button_id) + "," + std::to_string(b.box.x1) + "," +
           std::to_string(b.box.y1) + "," + std::to_string(b.box.x2) + "," + std::to_string(b.box.y2) + "\n";
  write_text_file_atomic(dir / "buttons.csv", csv);

  json questions = json::array();
  for (const auto& qa : task.qas) {
    json steps = json::array();
    for (const auto& s : qa.steps) {
      json cands = json::array();
      for (const auto& c : s.candidates)
        cands.push_back({{"text", c.text}, {"button", c.button_ref ? json(*c.button_ref) : json(nullptr)}});
      steps.push_back({{"candidates", cands}, {"correct", s.correct}});
    }
    questions.push_back({{"id", qa.qa_id}, {"text", qa.question}, {"steps", steps}});
  }
  write_text_file_atomic(dir / "qa.json", json{{"task_id", task.task_id}, {"questions", questions}}.dump(2) + "\n");
}

std::vector<std::string> list_task_ids(const fs::path& root) {
  if (!fs::is_directory(root)) throw MissingFile(root.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "qa.json")) ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

DatasetManifest split_dataset(std::vector<std::string> task_ids, double train_fraction, std::uint64_t seed) {
  std::sort(task_ids.begin(), task_ids.end());
  if (std::adjacent_find(task_ids.begin(), task_ids.end()) != task_ids.end())
    throw ConfigError("split_dataset: duplicate task ids");
  const auto n = static_cast<long>(task_ids.size());
  if (n < 2) throw InsufficientTasks("need at least 2 tasks to split, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must be in (0, 1), got " + std::to_string(train_fraction));

  long n_train = static_cast<long>(std::floor(static_cast<double>(n) * train_fraction + 0.5));
  n_train = std::clamp(n_train, 1L, n - 1);

  std::vector<std::string> order = task_ids;
  Rng rng(derive_seed(seed, 0x5B1174));
  rng.shuffle(order);

  DatasetManifest m;
  m.seed = seed;
  m.task_ids = task_ids;
  for (long i = 0; i < n; ++i) m.split[order[i]] = i < n_train ? Split::kTrain : Split::kVal;
  return m;
}

json manifest_to_json(const DatasetManifest& m) {
  return {{"seed", m.seed}, {"train", m.train_ids()}, {"val", m.val_ids()}};
}

DatasetManifest manifest_from_json(const json& j, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& id : j.at("train")) m.split[id.get<std::string>()] = Split::kTrain;
    for (const auto& id : j.at("val")) {
      const auto key = id.get<std::string>();
      if (m.split.contains(key)) throw SchemaError("manifest: task '" + key + "' in both train and val");
      m.split[key] = Split::kVal;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
  for (const auto& [id, s] : m.split) m.task_ids.push_back(id);
  return m;
}

void write_manifest(const fs::path& file, const DatasetManifest& m) {
  write_text_file_atomic(file, manifest_to_json(m).dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& file, const fs::path& root) {
  return manifest_from_json(read_json_file(file), root);
}

DatasetStats dataset_stats(const std::vector<TaskInstance>& tasks) {
  DatasetStats st;
  for (const auto& t : tasks) {
    TaskStats ts{t.task_id, static_cast<int>(t.frames.size()), static_cast<int>(t.qas.size())};
    st.total_video_seconds += ts.video_seconds;
    st.total_qa += ts.qa_count;
    for (const auto& qa : t.qas) {
      ++st.step_hist[static_cast<int>(qa.steps.size())];
      for (const auto& s : qa.steps) {
        ++st.candidate_hist[static_cast<int>(s.candidates.size())];
        ++st.total_steps;
      }
    }
    st.tasks.push_back(std::move(ts));
  }
  return st;
}

DatasetStats dataset_stats(const DatasetManifest& manifest) {
  std::vector<TaskInstance> tasks;
  for (const auto& id : manifest.task_ids) tasks.push_back(load_task(manifest.root / id));
  return dataset_stats(tasks);
}

json read_json_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingFile(file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(file.filename().string() + ": " + e.what());
  }
}

void write_text_file_atomic(const fs::path& file, const std::string& contents) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, file);
}

}  // namespace aqtc
