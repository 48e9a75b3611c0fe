#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtvqa/errors.hpp"
#include "mtvqa/synth_data.hpp"
#include "mtvqa/trainer.hpp"

namespace mtvqa {
namespace {

namespace fs = std::filesystem;

GeneratorConfig big() {
  GeneratorConfig c;
  c.train_size = 10000;
  c.val_size = 0;
  c.test_size = 0;
  return c;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("mtvqa_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Generator, SameIndexSameSample) {
  const GeneratorConfig cfg;
  EXPECT_EQ(generate_episode(cfg, 17), generate_episode(cfg, 17));
  EXPECT_FALSE(generate_episode(cfg, 17) == generate_episode(cfg, 18));
  auto other = cfg;
  other.seed = 8;
  EXPECT_FALSE(generate_episode(cfg, 17) == generate_episode(other, 17));
}

TEST(Generator, NoiselessFramesAreEmbeddings) {
  GeneratorConfig cfg;
  cfg.noise = 0.0;
  const auto emb = concept_embeddings(cfg);
  for (std::int64_t i = 0; i < 20; ++i) {
    const auto s = generate_episode(cfg, i);
    ASSERT_EQ(s.num_frames(), static_cast<std::size_t>(cfg.clip_length));
    for (std::size_t t = 0; t < s.num_frames(); ++t)
      for (int k = 0; k < cfg.video_feat_dim; ++k)
        EXPECT_EQ(s.video_features[t * cfg.video_feat_dim + k],
                  emb[static_cast<std::size_t>(s.latent_concepts[t]) * cfg.video_feat_dim + k]);
  }
}

TEST(Generator, StructureOfEverySample) {
  const GeneratorConfig cfg;
  const Vocabulary v{cfg.num_concepts, cfg.num_fillers};
  for (std::int64_t i = 0; i < 500; ++i) {
    const auto s = generate_episode(cfg, i);
    EXPECT_TRUE(s.gt_span.valid_ground_truth());
    EXPECT_EQ(s.subtitle_tokens.size(), s.latent_concepts.size());
    EXPECT_EQ(s.concept_tokens.size(), s.latent_concepts.size());
    ASSERT_EQ(s.question_tokens.size(), 3u);
    EXPECT_EQ(s.question_tokens[0], v.what());
    for (std::size_t t = 0; t < s.latent_concepts.size(); ++t) {
      EXPECT_EQ(s.concept_tokens[t], v.label(s.latent_concepts[t]));
      const auto tok = s.subtitle_tokens[t];
      EXPECT_TRUE(tok == v.word(s.latent_concepts[t]) || tok >= v.filler(0));
    }
    for (const auto& a : s.answers) {
      ASSERT_FALSE(a.empty());
      EXPECT_TRUE(v.is_word(a[0]));
      EXPECT_LE(a.size(), 1u + cfg.answer_extra_max);
    }
  }
}

TEST(Generator, CorrectIndexIsUniform) {
  const auto data = generate_range(big(), 0, 10000);
  int counts[5] = {};
  for (const auto& s : data) ++counts[s.correct_index];
  for (int c : counts) EXPECT_NEAR(c / 10000.0, 0.2, 0.02);
}

TEST(Generator, LongestAnswerIsNoBetterThanChance) {
  const auto data = generate_range(big(), 0, 10000);
  EXPECT_NEAR(longest_answer_accuracy(data), 0.2, 0.03);
}

TEST(Answerability, EveryEmittedSamplePasses) {
  const GeneratorConfig cfg;
  const Vocabulary v{cfg.num_concepts, cfg.num_fillers};
  for (const auto& s : generate_range(cfg, 0, 1000)) EXPECT_TRUE(answerability_check(s, v)) << s.index;
}

TEST(Answerability, InjectedDistractorFails) {
  const GeneratorConfig cfg;
  const Vocabulary v{cfg.num_concepts, cfg.num_fillers};
  auto s = generate_episode(cfg, 3);
  const int distractor = s.correct_index == 0 ? 1 : 0;
  const int start = static_cast<int>(s.gt_span.start * cfg.clip_length + 0.5);
  const int end = static_cast<int>(s.gt_span.end * cfg.clip_length + 0.5);
  // Overwrite a window step that does not hold the correct concept.
  const auto correct = s.answers[s.correct_index][0];
  for (int t = start; t < end; ++t)
    if (s.latent_concepts[t] != correct) {
      s.latent_concepts[t] = s.answers[distractor][0];
      break;
    }
  EXPECT_FALSE(answerability_check(s, v));
}

TEST(Generator, ParallelEqualsSerial) {
  const GeneratorConfig cfg;
  EXPECT_EQ(generate_range(cfg, 100, 257, 1), generate_range(cfg, 100, 257, 4));
}

TEST(Generator, ConfigErrors) {
  auto bad = [](auto edit) {
    GeneratorConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.span_max = 20; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.span_min = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.span_min = 5, c.span_max = 4; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.num_concepts = 10; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.distractors_in_clip = 5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.noise = -1; }).validate(), ConfigError);
  EXPECT_THROW(generate_episode(GeneratorConfig{}, GeneratorConfig{}.total_size()), IndexError);
  EXPECT_THROW(generate_episode(GeneratorConfig{}, -1), IndexError);
}

TEST(Splits, DisjointContiguousRanges) {
  GeneratorConfig c;
  c.train_size = 10, c.val_size = 4, c.test_size = 3;
  EXPECT_EQ(split_range(c, Split::Train), (std::pair<std::int64_t, std::int64_t>{0, 10}));
  EXPECT_EQ(split_range(c, Split::Val), (std::pair<std::int64_t, std::int64_t>{10, 4}));
  EXPECT_EQ(split_range(c, Split::Test), (std::pair<std::int64_t, std::int64_t>{14, 3}));
  EXPECT_EQ(split_from_string("val"), Split::Val);
  EXPECT_THROW(split_from_string("dev"), ConfigError);
}

TEST(Serialization, JsonLineRoundTrip) {
  const GeneratorConfig cfg;
  for (std::int64_t i = 0; i < 50; ++i) {
    const auto s = generate_episode(cfg, i);
    EXPECT_EQ(episode_from_json_line(episode_to_json_line(s)), s);
  }
  EXPECT_THROW(episode_from_json_line("{not json"), LoadError);
  EXPECT_THROW(episode_from_json_line("{\"index\": 1}"), LoadError);
}

TEST(Serialization, DatasetFilesAreDeterministicAndChecked) {
  GeneratorConfig cfg;
  cfg.train_size = 30, cfg.val_size = 10, cfg.test_size = 5;
  const auto a = scratch("ds_a"), b = scratch("ds_b");
  write_dataset(cfg, a, 1);
  write_dataset(cfg, b, 3);
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "meta.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;

  const auto meta = read_meta(a);
  EXPECT_EQ(meta.counts[1], 10);
  EXPECT_EQ(meta.vocab_size, cfg.vocab_size());
  const auto val = load_split(a, Split::Val);
  ASSERT_EQ(val.size(), 10u);
  EXPECT_EQ(val.front(), generate_episode(cfg, 30));

  {
    std::ofstream out(a / "val.jsonl", std::ios::app);
    out << episode_to_json_line(generate_episode(cfg, 0)) << "\n";
  }
  EXPECT_THROW(load_split(a, Split::Val), LoadError);
  EXPECT_THROW(read_meta(scratch("empty")), LoadError);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Serialization, GeneratorConfigJsonRoundTrip) {
  GeneratorConfig c;
  c.seed = 123456789012345ull;
  c.noise = 0.37;
  c.span_max = 4;
  const auto back = generator_config_from_json(generator_config_json(c));
  EXPECT_EQ(generator_config_json(back), generator_config_json(c));
  EXPECT_EQ(content_checksum("abc"), content_checksum("abc"));
  EXPECT_NE(content_checksum("abc"), content_checksum("abd"));
  EXPECT_EQ(content_checksum("").rfind("fnv1a64:", 0), 0u);
}

}  // namespace
}  // namespace mtvqa
