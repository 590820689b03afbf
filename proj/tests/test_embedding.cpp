#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "aqtc/embedding.hpp"
#include "aqtc/errors.hpp"
#include "aqtc/synthbench.hpp"
#include "aqtc/tensor_file.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace aqtc {
namespace {

SyntheticBackend small_backend(int d = 8) {
  SyntheticBackend::Options o;
  o.d_s = d;
  o.d_v = d;
  return SyntheticBackend(o);
}

TEST(SyntheticBackend, GoldenTextVector) {
  // Independent reference implementation of the documented recipe, seed 0,
  // d_s = 8, norm 32.
  const double golden[8] = {-2.996580123901367, -8.270249366760254, 20.61012840270996,  10.360183715820312,
                            -10.106136322021484, -2.2674200534820557, -6.1716179847717285, 16.40574836730957};
  const auto v = small_backend().embed_text("press the red button");
  ASSERT_EQ(v.size(), 8);
  for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(v[i], golden[i]) << i;
}

TEST(SyntheticBackend, GoldenImageVector) {
  Raster r(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      auto* p = r.at(x, y);
      const std::uint8_t v = x < 8 ? 255 : 0;
      p[0] = p[1] = p[2] = v;
      if (x < 4 && y < 4) p[0] = 255, p[1] = 0, p[2] = 0;
    }
  const double golden[4] = {8.699834823608398, 14.680063247680664, -11.304525375366211, 24.59708023071289};
  const auto v = small_backend(4).embed_image(r);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(v[i], golden[i]) << i;
}

TEST(SyntheticBackend, TokenizationAndNorm) {
  EXPECT_EQ(tokenize("Press the RED-button, now!"), (std::vector<std::string>{"press", "the", "red", "button", "now"}));
  EXPECT_TRUE(tokenize(" ,.; ").empty());
  const auto b = small_backend();
  EXPECT_EQ(b.embed_text("Press  the red button"), b.embed_text("press the red button"));
  EXPECT_NEAR(b.embed_text("hello world").norm(), 32.0, 1e-4);
  EXPECT_TRUE(b.embed_text("...").isZero());
  // Float-representable outputs.
  const auto v = b.embed_text("turn the dial");
  for (int i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<double>(static_cast<float>(v[i])));
  SyntheticBackend::Options o;
  o.seed = 1;
  EXPECT_NE(SyntheticBackend(o).embed_text("dial"), SyntheticBackend().embed_text("dial"));
}

TEST(EncodeScript, RowsAndShape) {
  const auto b = small_backend();
  const std::vector<std::string> s{"press the red button", "press the red button", "hold the dial"};
  const auto m = encode_script(s, b);
  EXPECT_EQ(m.rows(), 3);
  EXPECT_EQ(m.cols(), 8);
  EXPECT_EQ(m.row(0), m.row(1));
  EXPECT_EQ(Eigen::VectorXd(m.row(2).transpose()), b.embed_text("hold the dial"));
}

TEST(EncodeQuestion, Prefix) {
  const auto b = small_backend();
  EXPECT_EQ(encode_question("How to start?", b), b.embed_text("Question: How to start?"));
  EXPECT_EQ(encode_question("How to start?", b), encode_question("How to start?", b));
  EXPECT_NE(encode_question("How to start?", b), b.embed_text("How to start?"));
  EXPECT_THROW(encode_question("", b), EmptyText);
}

TEST(CandidatePrompt, PlaceholderBecomesThisButton) {
  EXPECT_EQ(candidate_prompt(Candidate{"press <button2> twice", 2}), "Answer: press this button twice");
  EXPECT_EQ(candidate_prompt(Candidate{"wait", std::nullopt}), "Answer: wait");
}

Raster gradient_image(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = r.at(x, y);
      p[0] = static_cast<std::uint8_t>(10 + x * 7);
      p[1] = static_cast<std::uint8_t>(20 + y * 5);
      p[2] = 200;
    }
  return r;
}

bool zero_px(const Raster& r, int x, int y) {
  const auto* p = r.at(x, y);
  return p[0] == 0 && p[1] == 0 && p[2] == 0;
}

bool same_px(const Raster& a, const Raster& b, int x, int y) {
  return std::equal(a.at(x, y), a.at(x, y) + 3, b.at(x, y));
}

TEST(ButtonRasters, SingleButtonReverseIsOriginal) {
  const auto img = gradient_image(20, 12);
  const std::vector<Button> buttons{{0, "p", Box{2, 2, 6, 6}}};
  EXPECT_EQ(build_button_rasters(img, buttons, buttons[0]).reverse, img);
}

TEST(ButtonRasters, FullImageTargetMasksEverything) {
  const auto img = gradient_image(20, 12);
  const std::vector<Button> buttons{{0, "p", Box{0, 0, 20, 12}}};
  const auto r = build_button_rasters(img, buttons, buttons[0]);
  for (auto v : r.mask.rgb) ASSERT_EQ(v, 0);
}

TEST(ButtonRasters, TwoDisjointBoxes) {
  const auto img = gradient_image(20, 12);
  const std::vector<Button> buttons{{0, "p", Box{1, 1, 5, 5}}, {1, "p", Box{10, 3, 15, 9}}};
  const auto r = build_button_rasters(img, buttons, buttons[0]);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool in0 = buttons[0].box.contains(x, y), in1 = buttons[1].box.contains(x, y);
      EXPECT_EQ(zero_px(r.mask, x, y), in0);
      EXPECT_EQ(zero_px(r.reverse, x, y), in1);
      if (!in0 && !in1) {
        EXPECT_TRUE(same_px(r.mask, img, x, y));
        EXPECT_TRUE(same_px(r.reverse, img, x, y));
      }
    }
  // Applying the construction again to the same target is a fixed point.
  const auto again = build_button_rasters(r.mask, buttons, buttons[0]);
  EXPECT_EQ(again.mask, r.mask);
  const auto again_rev = build_button_rasters(r.reverse, buttons, buttons[0]);
  EXPECT_EQ(again_rev.reverse, r.reverse);
}

TEST(ButtonRasters, TargetWinsOnOverlapAndOtherImagesIgnored) {
  const auto img = gradient_image(20, 12);
  const std::vector<Button> buttons{{0, "p", Box{2, 2, 8, 8}}, {1, "p", Box{6, 6, 12, 10}}, {2, "q", Box{0, 0, 20, 12}}};
  const auto r = build_button_rasters(img, buttons, buttons[0]);
  EXPECT_TRUE(same_px(r.reverse, img, 7, 7));   // in both boxes: kept
  EXPECT_TRUE(zero_px(r.reverse, 10, 8));       // only in the other box
  EXPECT_TRUE(same_px(r.reverse, img, 15, 1));  // button on image q does not apply
}

TEST(ButtonRasters, NotOnImage) {
  const auto img = gradient_image(20, 12);
  const std::vector<Button> buttons{{0, "p", Box{15, 5, 25, 9}}};
  EXPECT_THROW(build_button_rasters(img, buttons, buttons[0]), ButtonNotOnImage);
}

// A generated task written to disk, used for everything that needs pixels.
struct DiskTask {
  fs::path dir;
  TaskInstance task;
};

DiskTask disk_task(const std::string& name) {
  SynthConfig c;
  c.tasks = 1;
  c.seed = 4;
  const auto g = generate_task(c, 0);
  DiskTask d;
  d.dir = test::scratch_dir(name) / g.task.task_id;
  write_generated_task(d.dir, g);
  d.task = rebased(g.task, d.dir);
  return d;
}

TEST(EncodeCandidate, WidthsPerMode) {
  const auto d = disk_task("encode_candidate");
  const auto images = load_user_images(d.task);
  const auto b = small_backend();
  const Candidate with{"press <button" + std::to_string(d.task.buttons[0].button_id) + ">", d.task.buttons[0].button_id};
  const Candidate without{"wait a moment", std::nullopt};
  EXPECT_EQ(encode_candidate(with, d.task, images, b, ButtonMode::kNone).button.size(), 0);
  EXPECT_EQ(encode_candidate(with, d.task, images, b, ButtonMode::kMask).button.size(), 8);
  EXPECT_EQ(encode_candidate(with, d.task, images, b, ButtonMode::kReverse).button.size(), 8);
  const auto both = encode_candidate(with, d.task, images, b, ButtonMode::kBoth);
  ASSERT_EQ(both.button.size(), 16);
  EXPECT_EQ(Eigen::VectorXd(both.button.head(8)), encode_candidate(with, d.task, images, b, ButtonMode::kMask).button);
  EXPECT_EQ(Eigen::VectorXd(both.button.tail(8)), encode_candidate(with, d.task, images, b, ButtonMode::kReverse).button);
  const auto none = encode_candidate(without, d.task, images, b, ButtonMode::kReverse);
  EXPECT_EQ(none.button.size(), 8);
  EXPECT_TRUE(none.button.isZero());
  EXPECT_EQ(both.text, b.embed_text(candidate_prompt(with)));
  EXPECT_EQ(encode_candidate(with, d.task, images, b, ButtonMode::kBoth).button, both.button);
  EXPECT_EQ(button_width(ButtonMode::kNone, 8), 0);
  EXPECT_EQ(button_width(ButtonMode::kBoth, 8), 16);
}

TEST(SampleFrames, Counts) {
  const auto dir = test::scratch_dir("sample_frames");
  std::vector<fs::path> files;
  for (int i = 1; i <= 115; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%06d.png", i);
    test::write_solid_png(dir / "many" / name, 8, 8, static_cast<std::uint8_t>(i));
  }
  const auto all = sample_frames(dir / "many");
  ASSERT_EQ(all.size(), 115u);
  EXPECT_EQ(all[0].rgb[0], 1);
  EXPECT_EQ(all[114].rgb[0], 115);
  EXPECT_EQ(sample_frames(dir / "many", 200.0).size(), 115u);
  EXPECT_EQ(sample_frames(dir / "many", 23.0).size(), 23u);

  test::write_solid_png(dir / "one" / "000001.png", 8, 8);
  EXPECT_EQ(sample_frames(dir / "one").size(), 1u);
  EXPECT_EQ(sample_frames(dir / "one", 0.4).size(), 1u);

  fs::create_directories(dir / "empty");
  EXPECT_THROW(sample_frames(dir / "empty"), EmptyVideo);
}

TEST(Bundle, ShapesAndCacheRoundTrip) {
  const auto d = disk_task("bundle_cache");
  const auto b = small_backend();
  const auto fb = bundle(d.task, b, ButtonMode::kBoth);
  EXPECT_EQ(fb.video.rows(), static_cast<Eigen::Index>(d.task.frames.size()));
  EXPECT_EQ(fb.video.cols(), 8);
  EXPECT_EQ(fb.script.rows(), static_cast<Eigen::Index>(d.task.script.size()));
  EXPECT_EQ(fb.d_b(), 16);
  EXPECT_TRUE(validate_bundle(fb, d.task).empty());
  for (const auto& q : fb.qas) EXPECT_EQ(q.question.size(), fb.d_s());

  const auto file = cache_path(d.dir.parent_path(), d.task.task_id, ButtonMode::kBoth);
  EXPECT_EQ(file.filename(), "features_both.bin");
  write_cache(file, fb);
  const auto bytes = read_binary_file(file);
  const auto back = read_cache(file, d.task);
  EXPECT_EQ(serialize_cache(back), bytes);
  EXPECT_EQ(back.video, fb.video);
  EXPECT_EQ(back.script, fb.script);
  ASSERT_EQ(back.qas.size(), fb.qas.size());
  for (std::size_t q = 0; q < fb.qas.size(); ++q) {
    EXPECT_EQ(back.qas[q].question, fb.qas[q].question);
    for (std::size_t s = 0; s < fb.qas[q].steps.size(); ++s) {
      EXPECT_EQ(back.qas[q].steps[s].text, fb.qas[q].steps[s].text);
      EXPECT_EQ(back.qas[q].steps[s].button, fb.qas[q].steps[s].button);
    }
  }

  // Documented key names, f32 on disk.
  const auto tf = parse_tensor_file(bytes, kFeatureMagic, false);
  const auto& qa = d.task.qas[0];
  EXPECT_NE(tf.find("video"), nullptr);
  EXPECT_NE(tf.find("script"), nullptr);
  EXPECT_NE(tf.find("question_" + qa.qa_id), nullptr);
  EXPECT_NE(tf.find("cand_" + qa.qa_id + "_0_0_text"), nullptr);
  EXPECT_NE(tf.find("cand_" + qa.qa_id + "_0_0_btn"), nullptr);
  for (const auto& e : tf.entries) EXPECT_EQ(e.dtype, DType::kF32);

  // Deterministic: a second bundle serializes to the same bytes.
  EXPECT_EQ(serialize_cache(bundle(d.task, b, ButtonMode::kBoth)), bytes);
}

TEST(Bundle, CorruptCaches) {
  const auto d = disk_task("bundle_corrupt");
  const auto fb = bundle(d.task, small_backend(), ButtonMode::kReverse);
  const auto bytes = serialize_cache(fb);
  EXPECT_THROW(parse_cache(std::string_view(bytes).substr(0, bytes.size() / 2), d.task), CorruptCache);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(parse_cache(bad_magic, d.task), CorruptCache);
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(parse_cache(bad_version, d.task), CorruptCache);
  EXPECT_THROW(parse_cache(bytes + "x", d.task), CorruptCache);
  auto other = d.task;
  other.qas[0].qa_id = "renamed";
  EXPECT_THROW(parse_cache(bytes, other), CorruptCache);
}

}  // namespace
}  // namespace aqtc
