#include "mtvqa/synth_data.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "mtvqa/rng.hpp"

namespace mtvqa {

using nlohmann::json;

void GeneratorConfig::validate() const {
  if (num_concepts < 1 || num_fillers < 1) throw ConfigError("generator needs at least one concept and one filler");
  if (clip_length < 2) throw ConfigError("generator clip_length must be >= 2");
  if (span_min < 2 || span_max < span_min)
    throw ConfigError("generator span width range must satisfy 2 <= span_min <= span_max");
  if (span_max > clip_length)
    throw ConfigError("generator span_max " + std::to_string(span_max) + " is wider than the clip (" +
                      std::to_string(clip_length) + " steps)");
  if (clip_length - span_max < 4)
    throw ConfigError("generator needs clip_length - span_max >= 4 steps outside the window for distractors");
  if (distractors_in_clip < 0 || distractors_in_clip > 4)
    throw ConfigError("generator distractors_in_clip must be in [0, 4]");
  if (num_concepts < clip_length + 4 - distractors_in_clip)
    throw ConfigError("generator needs num_concepts >= clip_length + (4 - distractors_in_clip)");
  if (!(noise >= 0.0)) throw ConfigError("generator noise must be nonnegative");
  if (!(subtitle_keep >= 0.0 && subtitle_keep <= 1.0)) throw ConfigError("generator subtitle_keep must be in [0, 1]");
  if (video_feat_dim < 1) throw ConfigError("generator video_feat_dim must be >= 1");
  if (answer_extra_max < 0) throw ConfigError("generator answer_extra_max must be >= 0");
  if (train_size < 0 || val_size < 0 || test_size < 0) throw ConfigError("generator split sizes must be nonnegative");
}

std::vector<float> concept_embeddings(const GeneratorConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "concept-embeddings"));
  std::vector<float> e(static_cast<std::size_t>(cfg.num_concepts) * cfg.video_feat_dim);
  for (auto& x : e) x = static_cast<float>(rng.normal());
  return e;
}

EpisodeSample generate_episode(const GeneratorConfig& cfg, std::int64_t index) {
  cfg.validate();
  if (index < 0 || index >= cfg.total_size())
    throw IndexError("episode index " + std::to_string(index) + " outside dataset of " +
                     std::to_string(cfg.total_size()));
  static thread_local std::pair<std::uint64_t, std::vector<float>> cached_embeddings;
  const std::uint64_t emb_key =
      derive_seed(cfg.seed, static_cast<std::uint64_t>(cfg.num_concepts) * 65536u + cfg.video_feat_dim);
  if (cached_embeddings.second.empty() || cached_embeddings.first != emb_key)
    cached_embeddings = {emb_key, concept_embeddings(cfg)};
  const auto& emb = cached_embeddings.second;

  const Vocabulary vocab{cfg.num_concepts, cfg.num_fillers};
  const int T = cfg.clip_length;
  const int F = cfg.video_feat_dim;
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(index)));

  EpisodeSample s;
  s.index = index;
  s.feat_dim = F;

  // (1) distinct latent concepts; pool[T..] stay unused by the clip
  std::vector<std::int32_t> pool(cfg.num_concepts);
  std::iota(pool.begin(), pool.end(), 0);
  const int absent = 4 - cfg.distractors_in_clip;
  for (int t = 0; t < T + absent; ++t) {
    const auto j = t + static_cast<int>(rng.below(cfg.num_concepts - t));
    std::swap(pool[t], pool[j]);
  }
  s.latent_concepts.assign(pool.begin(), pool.begin() + T);

  // (2) frame features, (3) concept labels and subtitles
  s.video_features.resize(static_cast<std::size_t>(T) * F);
  for (int t = 0; t < T; ++t) {
    const float* e = emb.data() + static_cast<std::size_t>(s.latent_concepts[t]) * F;
    for (int k = 0; k < F; ++k) {
      float v = e[k];
      if (cfg.noise > 0.0) v += static_cast<float>(cfg.noise * rng.normal());
      s.video_features[static_cast<std::size_t>(t) * F + k] = v;
    }
  }
  for (int t = 0; t < T; ++t) {
    s.concept_tokens.push_back(vocab.label(s.latent_concepts[t]));
    if (rng.bernoulli(cfg.subtitle_keep))
      s.subtitle_tokens.push_back(vocab.word(s.latent_concepts[t]));
    else
      s.subtitle_tokens.push_back(vocab.filler(static_cast<int>(rng.below(cfg.num_fillers))));
  }

  // (4) answer window, anchor and target inside it
  const int width = static_cast<int>(rng.between(cfg.span_min, cfg.span_max));
  const int start = static_cast<int>(rng.between(0, T - width));
  const bool before = rng.bernoulli(0.5);
  int anchor, target;
  if (before) {
    anchor = static_cast<int>(rng.between(start + 1, start + width - 1));
    target = anchor - 1;
  } else {
    anchor = static_cast<int>(rng.between(start, start + width - 2));
    target = anchor + 1;
  }
  s.gt_span = TimeSpan::ground_truth(static_cast<double>(start) / T, static_cast<double>(start + width) / T);

  // (5) question
  s.question_tokens = {vocab.what(), before ? vocab.before() : vocab.after(),
                       vocab.word(s.latent_concepts[anchor])};

  // (6) answers: target, concepts from outside the window, absent concepts
  std::vector<int> outside;
  for (int t = 0; t < T; ++t)
    if (t < start || t >= start + width) outside.push_back(t);
  for (int k = 0; k < cfg.distractors_in_clip; ++k) {
    const auto j = k + static_cast<int>(rng.below(outside.size() - k));
    std::swap(outside[k], outside[j]);
  }
  std::array<int, 5> answer_concepts{s.latent_concepts[target]};
  for (int k = 0; k < cfg.distractors_in_clip; ++k) answer_concepts[1 + k] = s.latent_concepts[outside[k]];
  for (int k = 0; k < absent; ++k) answer_concepts[1 + cfg.distractors_in_clip + k] = pool[T + k];

  // (7) shuffle answer positions
  std::array<int, 5> order{0, 1, 2, 3, 4};
  rng.shuffle(order.begin(), order.end());
  for (int slot = 0; slot < 5; ++slot) {
    const int which = order[slot];
    if (which == 0) s.correct_index = slot;
    auto& a = s.answers[slot];
    a.push_back(vocab.word(answer_concepts[which]));
    const int extra = static_cast<int>(rng.between(0, cfg.answer_extra_max));
    for (int k = 0; k < extra; ++k) a.push_back(vocab.filler(static_cast<int>(rng.below(cfg.num_fillers))));
  }
  return s;
}

bool answerability_check(const EpisodeSample& s, const Vocabulary& vocab) {
  const auto T = static_cast<int>(s.latent_concepts.size());
  if (T == 0 || !s.gt_span.valid_ground_truth()) return false;
  if (s.correct_index < 0 || s.correct_index >= 5) return false;
  const int lo = static_cast<int>(std::lround(s.gt_span.start * T));
  const int hi = static_cast<int>(std::lround(s.gt_span.end * T));
  auto in_window = [&](int concept_id) {
    for (int t = lo; t < hi; ++t)
      if (s.latent_concepts[t] == concept_id) return true;
    return false;
  };
  for (int i = 0; i < 5; ++i) {
    int concept_id = -1;
    for (auto tok : s.answers[i])
      if (vocab.is_word(tok)) {
        concept_id = tok;
        break;
      }
    if (concept_id < 0) return false;
    if (in_window(concept_id) != (i == s.correct_index)) return false;
  }
  return true;
}

std::vector<EpisodeSample> generate_range(const GeneratorConfig& cfg, std::int64_t begin,
                                          std::int64_t count, unsigned threads) {
  std::vector<EpisodeSample> out(static_cast<std::size_t>(count));
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::int64_t>(count, 1))));
  auto work = [&](unsigned w) {
    for (std::int64_t i = w; i < count; i += threads) out[i] = generate_episode(cfg, begin + i);
  };
  if (threads == 1) {
    work(0);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  for (auto& t : pool) t.join();
  return out;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

std::pair<std::int64_t, std::int64_t> split_range(const GeneratorConfig& cfg, Split s) {
  switch (s) {
    case Split::Train: return {0, cfg.train_size};
    case Split::Val: return {cfg.train_size, cfg.val_size};
    case Split::Test: return {cfg.train_size + cfg.val_size, cfg.test_size};
  }
  return {0, 0};
}

std::string episode_to_json_line(const EpisodeSample& s) {
  json frames = json::array();
  for (std::size_t t = 0; t < s.num_frames(); ++t)
    frames.push_back(std::vector<float>(s.video_features.begin() + t * s.feat_dim,
                                        s.video_features.begin() + (t + 1) * s.feat_dim));
  json j;
  j["index"] = s.index;
  j["video_features"] = std::move(frames);
  j["concept_tokens"] = s.concept_tokens;
  j["subtitle_tokens"] = s.subtitle_tokens;
  j["question_tokens"] = s.question_tokens;
  j["answers"] = s.answers;
  j["correct_index"] = s.correct_index;
  j["gt_span"] = {s.gt_span.start, s.gt_span.end};
  j["latent_concepts"] = s.latent_concepts;
  return j.dump();
}

EpisodeSample episode_from_json_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    EpisodeSample s;
    s.index = j.at("index").get<std::int64_t>();
    const auto& frames = j.at("video_features");
    s.feat_dim = frames.empty() ? 0 : static_cast<int>(frames.front().size());
    for (const auto& row : frames) {
      if (static_cast<int>(row.size()) != s.feat_dim) throw LoadError("ragged video_features");
      for (const auto& v : row) s.video_features.push_back(v.get<float>());
    }
    s.concept_tokens = j.at("concept_tokens").get<std::vector<std::int32_t>>();
    s.subtitle_tokens = j.at("subtitle_tokens").get<std::vector<std::int32_t>>();
    s.question_tokens = j.at("question_tokens").get<std::vector<std::int32_t>>();
    s.answers = j.at("answers").get<std::array<std::vector<std::int32_t>, 5>>();
    s.correct_index = j.at("correct_index").get<int>();
    const auto span = j.at("gt_span").get<std::array<double, 2>>();
    s.gt_span = TimeSpan::ground_truth(span[0], span[1]);
    s.latent_concepts = j.at("latent_concepts").get<std::vector<std::int32_t>>();
    if (s.correct_index < 0 || s.correct_index >= 5) throw LoadError("correct_index out of range");
    return s;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed episode record: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("malformed episode record: ") + e.what());
  }
}

std::string content_checksum(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(bytes));
  return std::string("fnv1a64:") + buf;
}

namespace {

json generator_to_json(const GeneratorConfig& c) {
  return {{"seed", c.seed},
          {"num_concepts", c.num_concepts},
          {"num_fillers", c.num_fillers},
          {"clip_length", c.clip_length},
          {"span_min", c.span_min},
          {"span_max", c.span_max},
          {"noise", c.noise},
          {"subtitle_keep", c.subtitle_keep},
          {"video_feat_dim", c.video_feat_dim},
          {"answer_extra_max", c.answer_extra_max},
          {"distractors_in_clip", c.distractors_in_clip},
          {"train_size", c.train_size},
          {"val_size", c.val_size},
          {"test_size", c.test_size}};
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig c;
  c.seed = j.value("seed", c.seed);
  c.num_concepts = j.value("num_concepts", c.num_concepts);
  c.num_fillers = j.value("num_fillers", c.num_fillers);
  c.clip_length = j.value("clip_length", c.clip_length);
  c.span_min = j.value("span_min", c.span_min);
  c.span_max = j.value("span_max", c.span_max);
  c.noise = j.value("noise", c.noise);
  c.subtitle_keep = j.value("subtitle_keep", c.subtitle_keep);
  c.video_feat_dim = j.value("video_feat_dim", c.video_feat_dim);
  c.answer_extra_max = j.value("answer_extra_max", c.answer_extra_max);
  c.distractors_in_clip = j.value("distractors_in_clip", c.distractors_in_clip);
  c.train_size = j.value("train_size", c.train_size);
  c.val_size = j.value("val_size", c.val_size);
  c.test_size = j.value("test_size", c.test_size);
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LoadError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json generator_config_json(const GeneratorConfig& c) { return generator_to_json(c); }
GeneratorConfig generator_config_from_json(const json& j) { return generator_from_json(j); }

DatasetMeta write_dataset(const GeneratorConfig& cfg, const std::filesystem::path& dir,
                          unsigned threads) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  DatasetMeta meta;
  meta.generator = cfg;
  meta.vocab_size = cfg.vocab_size();
  meta.video_feat_dim = cfg.video_feat_dim;
  json splits = json::object();
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    const auto [begin, count] = split_range(cfg, s);
    std::string body;
    for (const auto& ep : generate_range(cfg, begin, count, threads)) {
      body += episode_to_json_line(ep);
      body += '\n';
    }
    const auto path = dir / (to_string(s) + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path.string());
    out << body;
    const auto k = static_cast<std::size_t>(s);
    meta.checksums[k] = content_checksum(body);
    meta.counts[k] = count;
    splits[to_string(s)] = {{"file", to_string(s) + ".jsonl"}, {"count", count}, {"checksum", meta.checksums[k]}};
  }
  json j = {{"format", "mtvqa-synthetic-v1"},
            {"generator", generator_to_json(cfg)},
            {"vocab_size", meta.vocab_size},
            {"video_feat_dim", meta.video_feat_dim},
            {"splits", splits}};
  std::ofstream(dir / "meta.json") << j.dump(2) << '\n';
  return meta;
}

DatasetMeta read_meta(const std::filesystem::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw LoadError("malformed meta.json in " + dir.string() + ": " + e.what());
  }
  DatasetMeta meta;
  meta.generator = generator_from_json(j.at("generator"));
  meta.vocab_size = j.at("vocab_size").get<int>();
  meta.video_feat_dim = j.at("video_feat_dim").get<int>();
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    const auto& e = j.at("splits").at(to_string(s));
    meta.checksums[static_cast<std::size_t>(s)] = e.at("checksum").get<std::string>();
    meta.counts[static_cast<std::size_t>(s)] = e.at("count").get<std::int64_t>();
  }
  return meta;
}

std::vector<EpisodeSample> load_split(const std::filesystem::path& dir, Split split) {
  const auto meta = read_meta(dir);
  const std::string body = read_file(dir / (to_string(split) + ".jsonl"));
  const auto k = static_cast<std::size_t>(split);
  if (content_checksum(body) != meta.checksums[k])
    throw LoadError(to_string(split) + ".jsonl checksum " + content_checksum(body) +
                    " does not match meta.json (" + meta.checksums[k] + ")");
  std::vector<EpisodeSample> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(episode_from_json_line(line));
  return out;
}

}  // namespace mtvqa
