#include "mtvqa/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtvqa/rng.hpp"

namespace mtvqa {

using nlohmann::json;

namespace {

std::string loss_form_name(LossForm f) { return f == LossForm::SummedBce ? "summed_bce" : "categorical"; }

LossForm loss_form_from(const std::string& s) {
  if (s == "summed_bce") return LossForm::SummedBce;
  if (s == "categorical") return LossForm::Categorical;
  throw ConfigError("model.loss_form must be summed_bce or categorical, got '" + s + "'");
}

std::string reg_form_name(RegForm f) { return f == RegForm::Norm ? "norm" : "squared"; }

RegForm reg_form_from(const std::string& s) {
  if (s == "norm") return RegForm::Norm;
  if (s == "squared") return RegForm::Squared;
  throw ConfigError("model.reg_form must be norm or squared, got '" + s + "'");
}

json weights_json(const LossWeights& w) { return json::array({w.qa, w.ma, w.tl}); }

LossWeights weights_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + " must be [qa, ma, tl]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Every key the user sets must exist in the defaults (catches typos in
// --set paths). Arrays and null defaults accept any value.
void check_known_keys(const json& user, const json& defaults, const std::string& prefix) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    const auto& d = defaults.at(it.key());
    if (d.is_object()) {
      if (!it.value().is_object()) throw ConfigError("config key '" + key + "' must be an object");
      check_known_keys(it.value(), d, key);
    }
  }
}

}  // namespace

json model_config_json(const ModelConfig& m) {
  json streams = json::array();
  for (Stream s : m.streams) streams.push_back(to_string(s));
  return {{"hidden_size", m.hidden_size},
          {"embed_dim", m.embed_dim},
          {"video_feat_dim", m.video_feat_dim},
          {"vocab_size", m.vocab_size},
          {"second_lstm_hidden", m.second_lstm_hidden},
          {"margin", m.margin},
          {"streams", streams},
          {"loss_form", loss_form_name(m.loss_form)},
          {"reg_form", reg_form_name(m.reg_form)},
          {"span_head", m.span_head}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  m.hidden_size = j.value("hidden_size", m.hidden_size);
  m.embed_dim = j.value("embed_dim", m.embed_dim);
  m.video_feat_dim = j.value("video_feat_dim", m.video_feat_dim);
  m.vocab_size = j.value("vocab_size", m.vocab_size);
  m.second_lstm_hidden = j.value("second_lstm_hidden", m.second_lstm_hidden);
  m.margin = j.value("margin", m.margin);
  if (j.contains("streams")) {
    m.streams.clear();
    for (const auto& s : j.at("streams")) m.streams.push_back(stream_from_string(s.get<std::string>()));
  }
  if (j.contains("loss_form")) m.loss_form = loss_form_from(j.at("loss_form").get<std::string>());
  if (j.contains("reg_form")) m.reg_form = reg_form_from(j.at("reg_form").get<std::string>());
  m.span_head = j.value("span_head", m.span_head);
  return m;
}

ScheduleSpec RunConfig::resolved_schedule() const {
  ScheduleSpec spec;
  if (schedule.kind == "curriculum") {
    spec = ScheduleSpec::default_curriculum(optim.total_steps);
  } else if (schedule.kind == "constant") {
    spec = ScheduleSpec::constant(schedule.weights);
  } else if (schedule.kind == "anchors") {
    spec.interpolation = schedule.interpolation;
    for (const auto& a : schedule.anchors) {
      std::int64_t step;
      if (a.step && a.fraction) throw ConfigError("schedule anchor sets both step and fraction");
      if (a.step)
        step = *a.step;
      else if (a.fraction)
        step = static_cast<std::int64_t>(std::floor(*a.fraction * static_cast<double>(optim.total_steps)));
      else
        throw ConfigError("schedule anchor needs a step or a fraction");
      if (!spec.anchors.empty() && spec.anchors.back().step == step)
        spec.anchors.back().weights = a.weights;
      else
        spec.anchors.push_back({step, a.weights});
    }
  } else {
    throw ConfigError("schedule.kind must be curriculum, constant or anchors, got '" + schedule.kind + "'");
  }
  spec = mask_schedule(std::move(spec), losses.qa, losses.ma, losses.tl);
  spec.validate();
  return spec;
}

void RunConfig::validate() const {
  if (!losses.qa && !losses.ma && !losses.tl) throw ConfigError("losses: at least one of qa, ma, tl must be active");
  if (optim.batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
  if (losses.ma && optim.batch_size < 2)
    throw ConfigError("optimizer.batch_size must be >= 2 when the MA loss is active (in-batch negatives)");
  if (optim.total_steps < 0) throw ConfigError("optimizer.total_steps must be >= 0");
  if (!(optim.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0))
    throw ConfigError("optimizer betas must lie in [0, 1)");
  if (!(optim.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (losses.tl && !model.span_head) throw ConfigError("the TL loss is active but model.span_head is false");
  if (losses.ma && model.video_streams().empty())
    throw ConfigError("the MA loss is active but model.streams has no video stream");
  generator.validate();
  resolved_schedule();
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["data"] = {{"dir", data_dir.string()}, {"generator", generator_config_json(generator)}};
  j["output"] = {{"dir", out_dir.string()}};
  j["model"] = model_config_json(model);
  j["losses"] = {{"qa", losses.qa}, {"ma", losses.ma}, {"tl", losses.tl}};
  json anchors = json::array();
  for (const auto& a : schedule.anchors) {
    json e = {{"weights", weights_json(a.weights)}};
    if (a.step) e["step"] = *a.step;
    if (a.fraction) e["fraction"] = *a.fraction;
    anchors.push_back(e);
  }
  j["schedule"] = {{"kind", schedule.kind},
                   {"interpolation", schedule.interpolation == Interpolation::Linear ? "linear" : "step"},
                   {"weights", weights_json(schedule.weights)},
                   {"anchors", anchors}};
  j["optimizer"] = {{"lr", optim.lr},       {"batch_size", optim.batch_size}, {"beta1", optim.beta1},
                    {"beta2", optim.beta2}, {"eps", optim.eps},               {"total_steps", optim.total_steps}};
  j["train"] = {{"log_every", log_every}, {"threads", threads}};
  j["ablation"] = {{"seeds", ablation_seeds}};
  return j;
}

RunConfig RunConfig::from_json(const json& user) {
  const json defaults = RunConfig{}.to_json();
  check_known_keys(user, defaults, "");
  json j = defaults;
  j.merge_patch(user);
  RunConfig c;
  try {
    if (!j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.data_dir = j.at("data").at("dir").get<std::string>();
    c.generator = generator_config_from_json(j.at("data").at("generator"));
    c.out_dir = j.at("output").at("dir").get<std::string>();
    c.model = model_config_from_json(j.at("model"));
    const auto& l = j.at("losses");
    c.losses = {l.at("qa").get<bool>(), l.at("ma").get<bool>(), l.at("tl").get<bool>()};
    const auto& s = j.at("schedule");
    c.schedule.kind = s.at("kind").get<std::string>();
    const auto interp = s.at("interpolation").get<std::string>();
    if (interp == "linear")
      c.schedule.interpolation = Interpolation::Linear;
    else if (interp == "step")
      c.schedule.interpolation = Interpolation::StepWise;
    else
      throw ConfigError("schedule.interpolation must be linear or step, got '" + interp + "'");
    c.schedule.weights = weights_from(s.at("weights"), "schedule.weights");
    for (const auto& a : s.at("anchors")) {
      AnchorSpec spec;
      if (a.contains("step")) spec.step = a.at("step").get<std::int64_t>();
      if (a.contains("fraction")) spec.fraction = a.at("fraction").get<double>();
      spec.weights = weights_from(a.at("weights"), "schedule.anchors[].weights");
      c.schedule.anchors.push_back(spec);
    }
    const auto& o = j.at("optimizer");
    c.optim.lr = o.at("lr").get<double>();
    c.optim.batch_size = o.at("batch_size").get<int>();
    c.optim.beta1 = o.at("beta1").get<double>();
    c.optim.beta2 = o.at("beta2").get<double>();
    c.optim.eps = o.at("eps").get<double>();
    c.optim.total_steps = o.at("total_steps").get<std::int64_t>();
    c.log_every = j.at("train").at("log_every").get<int>();
    c.threads = j.at("train").at("threads").get<unsigned>();
    c.ablation_seeds = j.at("ablation").at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("output");
  j.erase("ablation");
  j["data"].erase("dir");
  j["train"].erase("threads");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(j.dump()));
  return buf;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
  json j = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config file " + file->string() + " is not a JSON object");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return RunConfig::from_json(j);
}

}  // namespace mtvqa
