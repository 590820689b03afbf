#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "aqtc/dataset_io.hpp"
#include "aqtc/errors.hpp"
#include "aqtc/synthbench.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace aqtc {
namespace {

void write_file(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

// Two buttons, one QA of two steps.
fs::path write_fixture(const std::string& name) {
  const auto dir = test::scratch_dir(name) / "task_a";
  write_file(dir / "script.txt", "press the red button\npress the blue button\n");
  write_file(dir / "buttons.csv", "image,button_id,x1,y1,x2,y2\npanel.png,0,0,0,10,10\npanel.png,1,12,0,22,10\n");
  write_file(dir / "qa.json", R"({"task_id": "task_a", "questions": [{"id": "q0", "text": "How to start?",
    "steps": [{"candidates": [{"text": "press <button0>", "button": 0}, {"text": "press <button1>", "button": 1}], "correct": 0},
              {"candidates": [{"text": "press <button0>", "button": 0}, {"text": "press <button1>", "button": 1}], "correct": 1}]}]})");
  test::write_solid_png(dir / "images" / "panel.png", 32, 16);
  for (int i = 1; i <= 3; ++i) {
    char name_buf[16];
    std::snprintf(name_buf, sizeof name_buf, "%06d.png", i);
    test::write_solid_png(dir / "frames" / name_buf, 16, 16);
  }
  return dir;
}

TEST(LoadTask, Fixture) {
  const auto dir = write_fixture("load_fixture");
  const auto t = load_task(dir);
  EXPECT_EQ(t.task_id, "task_a");
  EXPECT_EQ(t.buttons.size(), 2u);
  ASSERT_EQ(t.qas.size(), 1u);
  EXPECT_EQ(t.qas[0].steps.size(), 2u);
  EXPECT_EQ(t.qas[0].ground_truth(), (std::vector<int>{0, 1}));
  EXPECT_EQ(t.frames.size(), 3u);
  EXPECT_EQ(t.script.size(), 2u);
  EXPECT_EQ(t.user_images.at("panel.png").width, 32);
  EXPECT_EQ(t.user_images.at("panel.png").height, 16);
  EXPECT_TRUE(validate_task(t).empty());
}

TEST(LoadTask, MissingQaJson) {
  const auto dir = write_fixture("load_missing");
  fs::remove(dir / "qa.json");
  try {
    load_task(dir);
    FAIL() << "expected MissingFile";
  } catch (const MissingFile& e) {
    EXPECT_EQ(e.file(), "qa.json");
  }
}

TEST(LoadTask, ButtonOnUnknownImage) {
  const auto dir = write_fixture("load_unknown_image");
  write_file(dir / "buttons.csv", "image,button_id,x1,y1,x2,y2\npanel.png,0,0,0,10,10\npanel2.png,1,12,0,22,10\n");
  EXPECT_THROW(load_task(dir), ValidationError);
}

TEST(LoadTask, SchemaErrors) {
  const auto dir = write_fixture("load_schema");
  write_file(dir / "buttons.csv", "img,button_id,x1,y1,x2,y2\n");
  EXPECT_THROW(load_task(dir), SchemaError);
  write_file(dir / "buttons.csv", "image,button_id,x1,y1,x2,y2\npanel.png,zero,0,0,10,10\n");
  EXPECT_THROW(load_task(dir), SchemaError);
  write_file(dir / "buttons.csv", "image,button_id,x1,y1,x2,y2\npanel.png,0,0,0,10,10\npanel.png,1,12,0,22,10\n");
  write_file(dir / "qa.json", R"({"task_id": "task_a", "questions": [{"id": "q0", "steps": []}]})");
  EXPECT_THROW(load_task(dir), SchemaError);
}

TEST(LoadTask, WriteTaskTextRoundTrip) {
  const auto dir = write_fixture("load_roundtrip");
  const auto t = load_task(dir);
  const auto copy = test::scratch_dir("load_roundtrip_copy") / "task_a";
  fs::create_directories(copy);
  fs::copy(dir / "images", copy / "images");
  fs::copy(dir / "frames", copy / "frames");
  write_task_text(copy, t);
  const auto back = load_task(copy);
  EXPECT_EQ(back.script, t.script);
  EXPECT_EQ(back.buttons, t.buttons);
  EXPECT_EQ(back.qas, t.qas);
  EXPECT_EQ(back.frames.size(), t.frames.size());
}

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("task_" + std::to_string(1000 + i));
  return out;
}

TEST(SplitDataset, Sizes) {
  const auto m = split_dataset(ids(100), 0.8, 7);
  EXPECT_EQ(m.train_ids().size(), 80u);
  EXPECT_EQ(m.val_ids().size(), 20u);
  for (std::uint64_t seed : {0, 1, 99}) {
    const auto s = split_dataset(ids(10), 0.8, seed);
    EXPECT_EQ(s.train_ids().size(), 8u);
    EXPECT_EQ(s.val_ids().size(), 2u);
  }
  EXPECT_THROW(split_dataset(ids(1), 0.8, 0), InsufficientTasks);
  // Clamped so both sides are non-empty.
  const auto tiny = split_dataset(ids(2), 0.99, 0);
  EXPECT_EQ(tiny.train_ids().size(), 1u);
  EXPECT_EQ(tiny.val_ids().size(), 1u);
}

TEST(SplitDataset, PartitionAndPurity) {
  auto in = ids(37);
  const auto a = split_dataset(in, 0.8, 5);
  std::reverse(in.begin(), in.end());
  const auto b = split_dataset(in, 0.8, 5);
  EXPECT_EQ(manifest_to_json(a).dump(), manifest_to_json(b).dump());
  const auto train_ids = a.train_ids();
  std::set<std::string> train(train_ids.begin(), train_ids.end());
  std::set<std::string> all(train);
  for (const auto& id : a.val_ids()) {
    EXPECT_FALSE(train.contains(id));
    all.insert(id);
  }
  EXPECT_EQ(all.size(), 37u);
  EXPECT_NE(manifest_to_json(split_dataset(ids(37), 0.8, 6)).dump(), manifest_to_json(a).dump());
}

TEST(Manifest, FileRoundTrip) {
  const auto dir = test::scratch_dir("manifest");
  const auto m = split_dataset(ids(12), 0.8, 3);
  write_manifest(dir / "manifest.json", m);
  const auto back = read_manifest(dir / "manifest.json", dir);
  EXPECT_EQ(manifest_to_json(back).dump(), manifest_to_json(m).dump());
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.root, dir);
}

TaskInstance task_with_steps(const std::string& id, const std::vector<int>& step_counts, int frames) {
  TaskInstance t;
  t.task_id = id;
  for (int i = 0; i < frames; ++i) t.frames.push_back("f");
  for (std::size_t q = 0; q < step_counts.size(); ++q) {
    QASample qa;
    qa.qa_id = "q" + std::to_string(q);
    for (int s = 0; s < step_counts[q]; ++s)
      qa.steps.push_back(StepSpec{std::vector<Candidate>(3, Candidate{"x", std::nullopt}), 0});
    t.qas.push_back(qa);
  }
  return t;
}

TEST(DatasetStats, Histograms) {
  const auto s = dataset_stats({task_with_steps("a", {1, 3}, 10), task_with_steps("b", {2}, 7)});
  EXPECT_EQ(s.step_hist, (std::map<int, int>{{1, 1}, {2, 1}, {3, 1}}));
  EXPECT_EQ(s.candidate_hist, (std::map<int, int>{{3, 6}}));
  EXPECT_EQ(s.total_qa, 3);
  EXPECT_EQ(s.total_steps, 6);
  EXPECT_EQ(s.total_video_seconds, 17);

  const auto empty = dataset_stats({task_with_steps("c", {}, 4)});
  EXPECT_EQ(empty.total_qa, 0);
  EXPECT_EQ(empty.tasks.at(0).qa_count, 0);
}

TEST(DatasetStats, TotalsMatchGeneratorCounts) {
  const auto dir = test::scratch_dir("stats_generated");
  SynthConfig c;
  c.tasks = 80;
  c.seed = 2;
  const auto summary = generate_dataset(c, dir);
  auto m = split_dataset(list_task_ids(dir), 0.8, 2);
  m.root = dir;
  const auto s = dataset_stats(m);
  EXPECT_EQ(s.tasks.size(), 80u);
  EXPECT_EQ(s.total_qa, summary.qa);
  EXPECT_EQ(s.total_steps, summary.steps);
  EXPECT_EQ(s.total_video_seconds, summary.video_seconds);
  EXPECT_EQ(s.step_hist, summary.step_hist);
  EXPECT_EQ(s.candidate_hist, summary.candidate_hist);
  int qa = 0, secs = 0;
  for (const auto& t : s.tasks) {
    qa += t.qa_count;
    secs += t.video_seconds;
  }
  EXPECT_EQ(qa, s.total_qa);
  EXPECT_EQ(secs, s.total_video_seconds);
}

TEST(ListFrameFiles, NumericOrder) {
  const auto dir = test::scratch_dir("frames_order") / "frames";
  for (const char* n : {"000010.png", "000002.png", "000001.png"}) test::write_solid_png(dir / n, 8, 8);
  const auto f = list_frame_files(dir);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].filename(), "000001.png");
  EXPECT_EQ(f[2].filename(), "000010.png");
  test::write_solid_png(dir / "cover.png", 8, 8);
  EXPECT_THROW(list_frame_files(dir), SchemaError);
}

}  // namespace
}  // namespace aqtc
