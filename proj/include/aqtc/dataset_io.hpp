#pragma once

// AssistQ on-disk layout, one directory per task:
//
//   script.txt   one narration sentence per line
//   buttons.csv  header `image,button_id,x1,y1,x2,y2`
//   qa.json      {"task_id", "questions": [{"id", "text", "steps": [{"candidates": [{"text", "button"}], "correct"}]}]}
//   images/      user-view images named in buttons.csv
//   frames/      000001.png, 000002.png, ... (1 fps)
//
// A video.mp4 next to these is tolerated and ignored.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqtc/core.hpp"

namespace aqtc {

enum class Split { kTrain, kVal };

struct DatasetManifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::vector<std::string> task_ids;  // sorted
  std::map<std::string, Split> split;

  std::vector<std::string> train_ids() const;
  std::vector<std::string> val_ids() const;
};

struct TaskStats {
  std::string task_id;
  int video_seconds = 0;
  int qa_count = 0;
};

struct DatasetStats {
  std::vector<TaskStats> tasks;
  int total_video_seconds = 0;
  int total_qa = 0;
  int total_steps = 0;
  std::map<int, int> step_hist;       // I -> number of QA
  std::map<int, int> candidate_hist;  // n_i -> number of steps

  nlohmann::json to_json() const;
};

TaskInstance load_task(const std::filesystem::path& dir);

// Writes script.txt, buttons.csv and qa.json. Images and frames are written by
// whoever owns the pixels (see synthbench).
void write_task_text(const std::filesystem::path& dir, const TaskInstance& task);

// Frame files of a frames/ directory in numeric order (names must be digits).
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& frames_dir);

// Sub-directories of `root` that contain a qa.json, sorted by name.
std::vector<std::string> list_task_ids(const std::filesystem::path& root);

DatasetManifest split_dataset(std::vector<std::string> task_ids, double train_fraction, std::uint64_t seed);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& file, const std::filesystem::path& root);

DatasetStats dataset_stats(const std::vector<TaskInstance>& tasks);
DatasetStats dataset_stats(const DatasetManifest& manifest);

// Shared JSON helpers.
nlohmann::json read_json_file(const std::filesystem::path& file);
void write_text_file_atomic(const std::filesystem::path& file, const std::string& contents);

}  // namespace aqtc
