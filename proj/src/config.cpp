#include "geoemu/config.hpp"

#include <filesystem>
#include <fstream>

#include "geoemu/error.hpp"

namespace geoemu::cfg {

json defaults() {
  json basin = {{"name", ""},
                {"lat_min", -90.0},
                {"lat_max", 90.0},
                {"lon_min", 0.0},
                {"lon_max", 360.0}};
  return json{
      {"seed", 1},
      {"data",
       {{"source", "synthetic"},  // synthetic | container
        {"path", ""},
        {"synthetic",
         {{"width", 16},
          {"length", 8},
          {"n_steps", 72},
          {"n_channels", 8},
          {"land_fraction", 0.2},
          {"seasonal_amp", 1.0},
          {"lowfreq_amp", 0.5},
          {"lowfreq_period_years", 4.0},
          {"spatial_amp", 0.5},
          {"spatial_mod", 0.0},
          {"predictor_noise", 0.05},
          {"target_noise", 0.0},
          {"target_noise_rho", 0.0},
          {"obs_gap_fraction", 0.0},
          {"calendar_start", "2000-01"},
          {"truth",
           {{"a", 1.0},
            {"b", 1.0},
            {"c_lag", 0.5},
            {"d", 0.5},
            {"f1", 0},
            {"f2", 1},
            {"f3", 2}}}}},
        {"split",
         {{"train_start", 0},
          {"train_end", 47},
          {"val_fraction", 0.2},
          {"test_start", 48},
          {"test_end", 71}}}}},
      {"preprocess",
       {{"stats_full_period", false},
        {"standardize_target", true},
        {"log_target", false}}},
      {"model",
       {{"arch", "unet"},
        {"mode", "static"},  // static | ar
        {"window", {{"delta_minus", 0}, {"delta_plus", 0}}},
        {"cnn", {{"depth", 5}, {"width", 56}}},
        {"convlstm", {{"hidden", 16}, {"layers", 3}, {"seq_len", 0}}},  // 0 = window size
        {"afno",
         {{"patch", 8},
          {"embed", 64},
          {"blocks", 4},
          {"mlp_hidden", 128},
          {"lambda", 0.01}}},
        {"unet", {{"width", 16}}},
        {"allow_padding", false}}},
      {"training",
       {{"optimizer", "adam"},
        {"learning_rate", 1e-3},
        {"batch_size", 4},
        {"max_epochs", 100},
        {"early_stop_patience", 20},
        {"rollout_k", 0},  // 0 = unset; required >= 1 in ar mode
        {"grad_clip", 1.0},
        {"threads", 0}}},
      {"forecast",
       {{"horizon", 11},
        {"predictor", "checkpoint"},  // checkpoint | persistence
        {"checkpoint", ""}}},
      {"evaluate",
       {{"predictor", "checkpoint"},  // checkpoint | persistence | oracle
        {"checkpoint", ""},
        {"truth_path", ""}}},
      {"diagnostics",
       {{"n_modes", 2},
        {"alt_annual_mean", false},
        {"pred_path", ""},
        {"basins", json::array({basin})}}},
      {"plot",
       {{"kind", "lead_table"},  // lead_table | map | pc_series | scatter
        {"path", ""},
        {"scale", 16}}},
      {"output", {{"prefix", "run"}}},
  };
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw validation_error("config: " + path + ": " + what);
}

bool type_compatible(const json& tmpl, const json& v) {
  if (tmpl.is_number_integer()) return v.is_number_integer();
  if (tmpl.is_number_float()) return v.is_number();
  if (tmpl.is_boolean()) return v.is_boolean();
  if (tmpl.is_string()) return v.is_string();
  if (tmpl.is_object()) return v.is_object();
  if (tmpl.is_array()) return v.is_array();
  return false;
}

// Recursively merge user values over the template, rejecting unknown keys
// and type mismatches. Arrays take the template's first element as the
// element schema.
void merge(json& tmpl, const json& user, const std::string& path) {
  if (!type_compatible(tmpl, user))
    bad(path, std::string("expected ") + tmpl.type_name() + ", got " +
                  user.type_name());
  if (tmpl.is_object()) {
    for (auto it = user.begin(); it != user.end(); ++it) {
      if (!tmpl.contains(it.key())) bad(path, "unknown key \"" + it.key() + "\"");
      merge(tmpl[it.key()], it.value(), path + "." + it.key());
    }
  } else if (tmpl.is_array()) {
    json elem_schema = tmpl.empty() ? json::object() : tmpl[0];
    json out = json::array();
    for (size_t i = 0; i < user.size(); ++i) {
      json e = elem_schema;
      merge(e, user[i], path + "[" + std::to_string(i) + "]");
      out.push_back(std::move(e));
    }
    tmpl = std::move(out);
  } else {
    tmpl = user;
  }
}

}  // namespace

json resolve(const json& user) {
  json full = defaults();
  if (!user.is_object()) throw validation_error("config: root must be an object");
  merge(full, user, "$");
  return full;
}

json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config: cannot open \"" + path + "\"");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw validation_error("config: parse error in \"" + path + "\": " + e.what());
  }
  return j;
}

void apply_overrides(json& config, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw validation_error("config: override \"" + kv + "\" lacks '='");
    std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // bare strings need no quotes
    }

    json* node = &config;
    std::string path = "$";
    size_t pos = 0;
    while (true) {
      size_t dot = key.find('.', pos);
      std::string part = key.substr(pos, dot == std::string::npos
                                             ? std::string::npos
                                             : dot - pos);
      if (!node->is_object() || !node->contains(part))
        throw validation_error("config: override key \"" + key +
                               "\" not in schema at " + path);
      node = &(*node)[part];
      path += "." + part;
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    merge(*node, value, path);
  }
}

void write_resolved(const json& config, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "resolved_config.json");
  if (!out) throw geoemu::runtime_error("cannot write resolved config in " + dir);
  out << config.dump(2) << "\n";
}

SyntheticConfig synthetic_config(const json& config) {
  const json& s = config.at("data").at("synthetic");
  SyntheticConfig c;
  c.width = s.at("width");
  c.length = s.at("length");
  c.n_steps = s.at("n_steps");
  c.n_channels = s.at("n_channels");
  c.land_fraction = s.at("land_fraction");
  c.seasonal_amp = s.at("seasonal_amp");
  c.lowfreq_amp = s.at("lowfreq_amp");
  c.lowfreq_period_years = s.at("lowfreq_period_years");
  c.spatial_amp = s.at("spatial_amp");
  c.spatial_mod = s.at("spatial_mod");
  c.predictor_noise = s.at("predictor_noise");
  c.target_noise = s.at("target_noise");
  c.target_noise_rho = s.at("target_noise_rho");
  c.obs_gap_fraction = s.at("obs_gap_fraction");
  c.calendar_start = s.at("calendar_start");
  const json& t = s.at("truth");
  c.truth.a = t.at("a");
  c.truth.b = t.at("b");
  c.truth.c_lag = t.at("c_lag");
  c.truth.d = t.at("d");
  c.truth.f1 = t.at("f1");
  c.truth.f2 = t.at("f2");
  c.truth.f3 = t.at("f3");
  return c;
}

SplitSpec split_spec(const json& config) {
  const json& s = config.at("data").at("split");
  SplitSpec sp;
  sp.train_start = s.at("train_start");
  sp.train_end = s.at("train_end");
  sp.val_fraction = s.at("val_fraction");
  sp.test_start = s.at("test_start");
  sp.test_end = s.at("test_end");
  return sp;
}

PreprocessOptions preprocess_options(const json& config) {
  const json& p = config.at("preprocess");
  PreprocessOptions o;
  o.stats_full_period = p.at("stats_full_period");
  o.standardize_target = p.at("standardize_target");
  o.log_target = p.at("log_target");
  return o;
}

Arch model_arch(const json& config) {
  return arch_from_name(config.at("model").at("arch"));
}

bool model_autoregressive(const json& config) {
  std::string mode = config.at("model").at("mode");
  if (mode != "static" && mode != "ar")
    throw validation_error("config: $.model.mode must be \"static\" or \"ar\", got \"" +
                           mode + "\"");
  int k = config.at("training").at("rollout_k");
  if (mode == "static" && k != 0)
    throw validation_error(
        "config: $.training.rollout_k is only valid in ar mode");
  return mode == "ar";
}

WindowSpec window_spec(const json& config) {
  const json& w = config.at("model").at("window");
  WindowSpec ws;
  ws.delta_minus = w.at("delta_minus");
  ws.delta_plus = w.at("delta_plus");
  if (ws.delta_minus < 0 || ws.delta_plus < 0)
    throw validation_error("config: $.model.window deltas must be >= 0");
  return ws;
}

ArchConfig arch_config(const json& config) {
  const json& m = config.at("model");
  ArchConfig c;
  c.cnn_depth = m.at("cnn").at("depth");
  c.cnn_width = m.at("cnn").at("width");
  c.lstm_hidden = m.at("convlstm").at("hidden");
  c.lstm_layers = m.at("convlstm").at("layers");
  c.lstm_seq_len = m.at("convlstm").at("seq_len");
  c.afno_patch = m.at("afno").at("patch");
  c.afno_embed = m.at("afno").at("embed");
  c.afno_blocks = m.at("afno").at("blocks");
  c.afno_mlp_hidden = m.at("afno").at("mlp_hidden");
  c.afno_lambda = m.at("afno").at("lambda");
  c.unet_width = m.at("unet").at("width");
  c.allow_padding = m.at("allow_padding");
  return c;
}

TrainConfig train_config(const json& config) {
  const json& t = config.at("training");
  TrainConfig c;
  std::string opt = t.at("optimizer");
  if (opt == "adam")
    c.optimizer = Optimizer::adam;
  else if (opt == "sgd_momentum")
    c.optimizer = Optimizer::sgd_momentum;
  else
    throw validation_error("config: $.training.optimizer unknown: \"" + opt + "\"");
  c.learning_rate = t.at("learning_rate");
  c.batch_size = t.at("batch_size");
  c.max_epochs = t.at("max_epochs");
  c.early_stop_patience = t.at("early_stop_patience");
  int k = t.at("rollout_k");
  c.rollout_k = k == 0 ? 1 : k;
  c.grad_clip = t.at("grad_clip");
  c.seed = uint64_t(int64_t(config.at("seed")));
  c.threads = t.at("threads");
  c.validate();
  return c;
}

std::vector<BasinBox> basin_boxes(const json& config) {
  std::vector<BasinBox> boxes;
  for (const json& b : config.at("diagnostics").at("basins")) {
    BasinBox box;
    box.name = b.at("name");
    if (box.name.empty()) continue;  // default placeholder entry
    box.lat_min = b.at("lat_min");
    box.lat_max = b.at("lat_max");
    box.lon_min = b.at("lon_min");
    box.lon_max = b.at("lon_max");
    boxes.push_back(std::move(box));
  }
  return boxes;
}

}  // namespace geoemu::cfg
