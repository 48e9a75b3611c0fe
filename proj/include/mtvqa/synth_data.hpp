#pragma once

// Synthetic multi-modal QA episodes with planted ground truth.
//
// Each clip is a sequence of distinct latent concepts. The frame features
// and the visual-concept tokens show every step's concept; the subtitle
// names it only with probability `subtitle_keep`. A question asks which
// concept appears immediately before/after an anchor concept, the answer
// window around both is the localization target. Distractors are concepts
// from other parts of the same clip or concepts the clip never shows.
//
// Sample i draws all of its randomness from hash(seed, i), so splits can be
// generated in any order or in parallel with identical bytes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtvqa/aux_losses.hpp"

namespace mtvqa {

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int num_concepts = 32;
  int num_fillers = 8;
  int clip_length = 12;       // time steps per clip
  int span_min = 3;           // answer window width in steps
  int span_max = 5;
  double noise = 0.1;         // sigma added to frame features
  double subtitle_keep = 0.75;
  int video_feat_dim = 24;
  int answer_extra_max = 3;   // each answer gets 0..max filler tokens
  int distractors_in_clip = 0;  // the rest name concepts absent from the clip
  std::int64_t train_size = 2000;
  std::int64_t val_size = 500;
  std::int64_t test_size = 500;

  int vocab_size() const { return 2 * num_concepts + 3 + num_fillers; }
  std::int64_t total_size() const { return train_size + val_size + test_size; }

  /// Throws ConfigError (e.g. window wider than the clip leaves room for).
  void validate() const;
};

/// Token id layout shared by generator and tests.
struct Vocabulary {
  int num_concepts;
  int num_fillers;

  std::int32_t word(int concept_id) const { return concept_id; }
  std::int32_t label(int concept_id) const { return num_concepts + concept_id; }
  std::int32_t what() const { return 2 * num_concepts; }
  std::int32_t before() const { return 2 * num_concepts + 1; }
  std::int32_t after() const { return 2 * num_concepts + 2; }
  std::int32_t filler(int f) const { return 2 * num_concepts + 3 + f; }
  bool is_word(std::int32_t tok) const { return tok >= 0 && tok < num_concepts; }
  int size() const { return 2 * num_concepts + 3 + num_fillers; }
};

struct EpisodeSample {
  std::int64_t index = 0;
  int feat_dim = 0;
  std::vector<float> video_features;          // [n_img, feat_dim] row-major
  std::vector<std::int32_t> concept_tokens;   // visual-concept labels, one per step
  std::vector<std::int32_t> subtitle_tokens;
  std::vector<std::int32_t> question_tokens;
  std::array<std::vector<std::int32_t>, 5> answers;
  int correct_index = 0;
  TimeSpan gt_span;
  std::vector<std::int32_t> latent_concepts;  // ground truth per step

  std::size_t num_frames() const { return feat_dim ? video_features.size() / feat_dim : 0; }
  bool operator==(const EpisodeSample&) const = default;
};

/// Fixed per-concept frame embedding [num_concepts, video_feat_dim].
std::vector<float> concept_embeddings(const GeneratorConfig& cfg);

EpisodeSample generate_episode(const GeneratorConfig& cfg, std::int64_t index);

/// Rule-based check: the correct answer's concept occurs inside gt_span in
/// the latent sequence and no distractor's concept does.
bool answerability_check(const EpisodeSample& s, const Vocabulary& vocab);

/// Samples [begin, begin + count), split across `threads` workers.
std::vector<EpisodeSample> generate_range(const GeneratorConfig& cfg, std::int64_t begin,
                                          std::int64_t count, unsigned threads = 1);

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Global index range of a split: train first, then val, then test.
std::pair<std::int64_t, std::int64_t> split_range(const GeneratorConfig& cfg, Split s);

// JSON lines: one episode per line.
std::string episode_to_json_line(const EpisodeSample& s);
EpisodeSample episode_from_json_line(const std::string& line);

struct DatasetMeta {
  GeneratorConfig generator;
  int vocab_size = 0;
  int video_feat_dim = 0;
  std::array<std::string, 3> checksums;  // train, val, test
  std::array<std::int64_t, 3> counts{};
};

/// Writes train/val/test .jsonl and meta.json into dir; returns the meta.
DatasetMeta write_dataset(const GeneratorConfig& cfg, const std::filesystem::path& dir,
                          unsigned threads = 1);

DatasetMeta read_meta(const std::filesystem::path& dir);

/// Loads one split and verifies its checksum against meta.json.
std::vector<EpisodeSample> load_split(const std::filesystem::path& dir, Split split);

nlohmann::json generator_config_json(const GeneratorConfig& c);
/// Missing keys keep their defaults.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

/// "fnv1a64:<16 hex digits>" of a byte string.
std::string content_checksum(const std::string& bytes);

}  // namespace mtvqa
