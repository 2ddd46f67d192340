#include "cizsl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cizsl/errors.hpp"

namespace cizsl {

using nlohmann::json;

namespace {

// Reads fields from a JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) throw ValidationError("unknown config key '" + prefix() + key + "'");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config key '" + prefix() + key + "' has the wrong type");
    }
  }

  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    std::string s;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    get(key, s);
    out = parse(s);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json to_json(const DivergenceSpec& d) {
  return {{"family", to_string(d.family)}, {"gamma", d.gamma},           {"beta", d.beta},
          {"learn_gamma", d.learn_gamma},  {"learn_beta", d.learn_beta}, {"orientation", to_string(d.orientation)}};
}

void read(const json& j, DivergenceSpec& d, const std::string& where) {
  Reader r(j, where);
  r.get_enum("family", d.family, divergence_family_from_string);
  r.get("gamma", d.gamma);
  r.get("beta", d.beta);
  r.get("learn_gamma", d.learn_gamma);
  r.get("learn_beta", d.learn_beta);
  r.get_enum("orientation", d.orientation, orientation_from_string);
}

json to_json(const LossConfig& l) {
  return {{"lambda_creativity", l.lambda_creativity},
          {"realism_term", l.realism_term},
          {"entropy_term", l.entropy_term},
          {"new_class_ablation", l.new_class_ablation},
          {"creativity_on_discriminator", l.creativity_on_discriminator},
          {"segc_active", l.segc_active},
          {"segc_normalized", l.segc_normalized},
          {"eta", l.eta},
          {"rf_hallucinated", l.rf_hallucinated},
          {"u_categorization", l.u_categorization},
          {"k_unseen_cap", l.k_unseen_cap},
          {"visual_pivot", l.visual_pivot},
          {"pivot_samples", l.pivot_samples},
          {"divergence", to_json(l.divergence)}};
}

void read(const json& j, LossConfig& l, const std::string& where) {
  Reader r(j, where);
  r.get("lambda_creativity", l.lambda_creativity);
  r.get("realism_term", l.realism_term);
  r.get("entropy_term", l.entropy_term);
  r.get("new_class_ablation", l.new_class_ablation);
  r.get("creativity_on_discriminator", l.creativity_on_discriminator);
  r.get("segc_active", l.segc_active);
  r.get("segc_normalized", l.segc_normalized);
  r.get("eta", l.eta);
  r.get("rf_hallucinated", l.rf_hallucinated);
  r.get("u_categorization", l.u_categorization);
  r.get("k_unseen_cap", l.k_unseen_cap);
  r.get("visual_pivot", l.visual_pivot);
  r.get("pivot_samples", l.pivot_samples);
  if (const json* d = r.child("divergence")) read(*d, l.divergence, r.prefix() + "divergence");
}

json to_json(const ArchSpec& a) {
  return {{"preset", to_string(a.preset)},   {"semantic_dim", a.semantic_dim}, {"reduced_dim", a.reduced_dim},
          {"noise_dim", a.noise_dim},        {"visual_dim", a.visual_dim},     {"hidden_dim", a.hidden_dim}};
}

void read(const json& j, ArchSpec& a, const std::string& where) {
  Reader r(j, where);
  r.get_enum("preset", a.preset, arch_preset_from_string);
  r.get("semantic_dim", a.semantic_dim);
  r.get("reduced_dim", a.reduced_dim);
  r.get("noise_dim", a.noise_dim);
  r.get("visual_dim", a.visual_dim);
  r.get("hidden_dim", a.hidden_dim);
}

std::string kind_name(HallucinationPolicy::Kind k) {
  switch (k) {
    case HallucinationPolicy::Kind::Uniform: return "uniform";
    case HallucinationPolicy::Kind::Fixed: return "fixed";
    case HallucinationPolicy::Kind::Gaussian: return "gaussian";
  }
  return "uniform";
}

HallucinationPolicy::Kind kind_from_name(const std::string& s) {
  if (s == "uniform") return HallucinationPolicy::Kind::Uniform;
  if (s == "fixed") return HallucinationPolicy::Kind::Fixed;
  if (s == "gaussian") return HallucinationPolicy::Kind::Gaussian;
  throw ValidationError("unknown hallucination kind '" + s + "' (expected uniform, fixed or gaussian)");
}

json to_json(const HallucinationPolicy& p) {
  json intervals = json::array();
  for (const auto& i : p.intervals) intervals.push_back({i.lo, i.hi});
  return {{"kind", kind_name(p.kind)}, {"intervals", intervals}, {"mean", p.mean}, {"stddev", p.stddev}};
}

void read(const json& j, HallucinationPolicy& p, const std::string& where) {
  if (j.is_string()) {
    p = HallucinationPolicy::preset(j.get<std::string>());
    return;
  }
  Reader r(j, where);
  r.get_enum("kind", p.kind, kind_from_name);
  std::vector<std::array<double, 2>> iv;
  if (r.child("intervals")) {
    r.get("intervals", iv);
    p.intervals.clear();
    for (const auto& [lo, hi] : iv) p.intervals.push_back({lo, hi});
  }
  r.get("mean", p.mean);
  r.get("stddev", p.stddev);
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"n_steps", c.n_steps},
          {"batch_size", c.batch_size},
          {"n_d", c.n_d},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"lambda_grid", c.lambda_grid},
          {"eval_every", c.eval_every},
          {"seed", c.seed},
          {"n_generate_eval", c.n_generate_eval},
          {"eval_metric", to_string(c.eval_metric)},
          {"class_balanced", c.class_balanced},
          {"loss", to_json(c.loss)},
          {"arch", to_json(c.arch)},
          {"policy", to_json(c.policy)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  {
    Reader r(j, "");
    r.get("n_steps", c.n_steps);
    r.get("batch_size", c.batch_size);
    r.get("n_d", c.n_d);
    r.get("lr", c.adam.lr);
    r.get("beta1", c.adam.beta1);
    r.get("beta2", c.adam.beta2);
    r.get("adam_eps", c.adam.eps);
    r.get("lambda_grid", c.lambda_grid);
    r.get("eval_every", c.eval_every);
    r.get("seed", c.seed);
    r.get("n_generate_eval", c.n_generate_eval);
    r.get_enum("eval_metric", c.eval_metric, pool_metric_from_string);
    r.get("class_balanced", c.class_balanced);
    if (const json* l = r.child("loss")) read(*l, c.loss, "loss");
    if (const json* a = r.child("arch")) read(*a, c.arch, "arch");
    if (const json* p = r.child("policy")) read(*p, c.policy, "policy");
  }
  c.validate();
  return c;
}

json to_json(const SyntheticSpec& s) {
  return {{"k_seen", s.k_seen},
          {"k_unseen", s.k_unseen},
          {"visual_dim", s.visual_dim},
          {"semantic_dim", s.semantic_dim},
          {"samples_per_class", s.samples_per_class},
          {"cluster_spread", s.cluster_spread},
          {"semantic_noise", s.semantic_noise},
          {"split_mode", to_string(s.split_mode)},
          {"seed", s.seed},
          {"seen_test_fraction", s.seen_test_fraction}};
}

SyntheticSpec synthetic_spec_from_json(const json& j) {
  SyntheticSpec s;
  {
    Reader r(j, "");
    r.get("k_seen", s.k_seen);
    r.get("k_unseen", s.k_unseen);
    r.get("visual_dim", s.visual_dim);
    r.get("semantic_dim", s.semantic_dim);
    r.get("samples_per_class", s.samples_per_class);
    r.get("cluster_spread", s.cluster_spread);
    r.get("semantic_noise", s.semantic_noise);
    r.get_enum("split_mode", s.split_mode, split_mode_from_string);
    r.get("seed", s.seed);
    r.get("seen_test_fraction", s.seen_test_fraction);
  }
  s.validate();
  return s;
}

void apply_override(json& j, const std::string& path, const std::string& value) {
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ValidationError("unknown config key '" + path + "'");
    node = &(*node)[part];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  *node = parsed;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like key=value: '" + assignment + "'");
  apply_override(j, assignment.substr(0, eq), assignment.substr(eq + 1));
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed config " + path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

}  // namespace cizsl
