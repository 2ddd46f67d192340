#include "cizsl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cizsl/config.hpp"
#include "cizsl/errors.hpp"

namespace cizsl {

void TrainConfig::validate() const {
  if (n_d < 1) throw ValidationError("n_d must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (eval_every < 1) throw ValidationError("eval_every must be at least 1");
  if (n_generate_eval < 1) throw ValidationError("n_generate_eval must be at least 1");
  if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0))
    throw ValidationError("invalid Adam settings");
  for (double l : lambda_grid)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("lambda_grid entries must be finite and non-negative");
  if (!(loss.lambda_creativity >= 0.0) || !std::isfinite(loss.lambda_creativity))
    throw ValidationError("lambda_creativity must be finite and non-negative");
  loss.validate();
  policy.validate();
}

std::string TrainHistory::to_csv() const {
  std::string out = "step,loss_g,loss_d,wasserstein,top1,auc,gamma,beta\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.6f,%.6f,%.9g,%.9g\n", r.step, r.loss_g, r.loss_d,
                  r.wasserstein, r.top1, r.auc, r.gamma, r.beta);
    out += buf;
  }
  return out;
}

ParamStore ModelParams::all() const {
  ParamStore p = gen;
  p.merge(disc);
  p.merge(div);
  return p;
}

namespace {

ArchSpec resolved_arch(const ZslDataset& ds, const TrainConfig& cfg) {
  ArchSpec arch = cfg.arch;
  auto fill = [](std::size_t& field, std::size_t actual, const char* what) {
    if (field != 0 && field != actual)
      throw DimensionError(std::string("config ") + what + " " + std::to_string(field) + " does not match the dataset (" +
                           std::to_string(actual) + ")");
    field = actual;
  };
  fill(arch.semantic_dim, ds.semantic_dim(), "semantic_dim");
  fill(arch.visual_dim, ds.visual_dim(), "visual_dim");
  arch.validate();
  return arch;
}

// Runs a loss-and-gradient evaluation, tagging numeric failures with the step.
template <class F>
ScalarGrad at_step(std::size_t step, const char* which, F&& f) {
  ScalarGrad g;
  try {
    g = f();
  } catch (const NumericError& e) {
    throw NumericError(std::string(which) + " update at step " + std::to_string(step) + ": " + e.what());
  }
  if (!std::isfinite(g.value))
    throw NumericError(std::string(which) + " update at step " + std::to_string(step) + ": non-finite loss");
  return g;
}

}  // namespace

ModelParams init_model(const ZslDataset& ds, const TrainConfig& cfg) {
  ModelParams m;
  m.arch = resolved_arch(ds, cfg);
  m.head = cfg.loss.head(ds.k_seen());
  Rng rng(cfg.seed, 1);
  m.gen = init_generator(m.arch, rng);
  m.disc = init_discriminator(m.arch, m.head, rng);
  m.div = init_divergence_params(cfg.loss.divergence);
  return m;
}

ModelParams model_from_params(const ArchSpec& arch, const HeadSpec& head, const ParamStore& all) {
  ModelParams m;
  m.arch = arch;
  m.head = head;
  m.gen = all.subset("G.");
  m.disc = all.subset("D.");
  m.div = all.subset("E.");
  if (m.gen.size() + m.disc.size() + m.div.size() != all.size())
    throw ValidationError("parameter store has entries outside G., D. and E.");
  return m;
}

void save_model(const ModelParams& model, const TrainConfig& cfg, const std::filesystem::path& dir) {
  TrainConfig snapshot = cfg;
  snapshot.arch = model.arch;
  Checkpoint ck;
  ck.arch_tag = model.arch_tag();
  ck.params = model.all();
  ck.config = {{"train", to_json(snapshot)},
               {"head", {{"k_seen", model.head.k_seen}, {"segc", model.head.segc}, {"extra_class", model.head.extra_class}}}};
  save_checkpoint(ck, dir);
}

std::pair<ModelParams, TrainConfig> load_model(const std::filesystem::path& dir, const std::string& expected_arch_tag) {
  const Checkpoint ck = load_checkpoint(dir, expected_arch_tag);
  if (!ck.config.contains("train") || !ck.config.contains("head"))
    throw ValidationError("checkpoint in " + dir.string() + " has no model configuration");
  TrainConfig cfg = train_config_from_json(ck.config.at("train"));
  HeadSpec head;
  try {
    const auto& h = ck.config.at("head");
    head.k_seen = h.at("k_seen").get<std::size_t>();
    head.segc = h.at("segc").get<bool>();
    head.extra_class = h.at("extra_class").get<bool>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("checkpoint in " + dir.string() + " has a malformed head description");
  }
  ModelParams m = model_from_params(cfg.arch, head, ck.params);
  if (m.arch_tag() != ck.arch_tag)
    throw ValidationError("checkpoint arch tag '" + ck.arch_tag + "' disagrees with its configuration ('" +
                          m.arch_tag() + "')");
  return {std::move(m), std::move(cfg)};
}

Trainer::Trainer(const ZslDataset& ds, const TrainConfig& cfg)
    : ds_(ds), cfg_(cfg), rng_(cfg.seed, 2) {
  cfg_.validate();
  ds_.validate();
  if (ds_.k_seen() < 2) throw ValidationError("training needs at least 2 seen classes");
  model_ = init_model(ds_, cfg_);
  signs_ = divergence_signs(cfg_.loss.divergence);
  adam_g_ = AdamState::for_params(model_.gen);
  adam_d_ = AdamState::for_params(model_.disc);
  adam_e_ = AdamState::for_params(model_.div);

  by_class_.resize(ds_.k_seen());
  for (std::size_t i = 0; i < ds_.seen_labels.size(); ++i) by_class_[ds_.seen_labels[i]].push_back(i);
  real_means_ = Tensor(ds_.k_seen(), ds_.visual_dim());
  for (std::size_t i = 0; i < ds_.seen_labels.size(); ++i) {
    auto dst = real_means_.row_span(ds_.seen_labels[i]);
    auto src = ds_.seen_features.row_span(i);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  for (std::size_t k = 0; k < ds_.k_seen(); ++k)
    for (double& v : real_means_.row_span(k)) v /= double(by_class_[k].size());
}

std::vector<std::size_t> Trainer::sample_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) {
    if (cfg_.class_balanced) {
      const auto& members = by_class_[rng_.uniform_int(by_class_.size())];
      i = members[rng_.uniform_int(members.size())];
    } else {
      i = rng_.uniform_int(ds_.seen_labels.size());
    }
  }
  return idx;
}

SeenTextBatch Trainer::seen_batch(std::vector<std::size_t> labels) {
  SeenTextBatch b;
  b.t = gather_rows(ds_.seen_semantics, labels);
  b.z = sample_noise(rng_, labels.size(), model_.arch.noise_dim);
  b.y = std::move(labels);
  return b;
}

TextNoiseBatch Trainer::hallucinated_batch(std::size_t n) {
  TextNoiseBatch b;
  b.t = sample_hallucinated_text(ds_.seen_semantics, cfg_.policy, n, rng_).text;
  b.z = sample_noise(rng_, n, model_.arch.noise_dim);
  return b;
}

double Trainer::discriminator_step() {
  const std::size_t m = cfg_.batch_size;
  DiscriminatorInputs in;
  const auto idx = sample_indices(m);
  in.real.x = gather_rows(ds_.seen_features, idx);
  for (auto i : idx) in.real.y.push_back(ds_.seen_labels[i]);
  in.seen = seen_batch(in.real.y);
  const LossConfig& lc = cfg_.loss;
  if (lc.rf_hallucinated || lc.creativity_on_discriminator || lc.new_class_ablation) in.hallucinated = hallucinated_batch(m);
  const Tensor x_fake = generate_features(model_.gen, model_.arch, in.seen.t, in.seen.z);
  in.interpolate = lipschitz_interpolate(in.real.x, x_fake, rng_);
  in.seen_semantics = ds_.seen_semantics;
  freeze_class_tables(model_.gen, in);

  double wasserstein = 0.0;
  const ScalarGrad g = at_step(steps_ + 1, "discriminator", [&] {
    return grad_scalar(model_.disc, [&](ad::Tape& tape, const BoundParams& d) {
      BoundParams gen(tape, model_.gen, false);
      BoundParams div(tape, model_.div, false);
      const Nets nets{gen, d, &div, model_.arch, model_.head, lc, signs_};
      DiscriminatorTerms t = discriminator_loss(nets, in);
      wasserstein = -(t.real.item() + t.fake.item());
      return t.total;
    });
  });
  adam_step(model_.disc, g.grads, adam_d_, cfg_.adam);
  ++d_updates_;
  last_d_ = g.value;
  last_w_ = wasserstein;
  return g.value;
}

double Trainer::generator_step() {
  const std::size_t m = cfg_.batch_size;
  const LossConfig& lc = cfg_.loss;
  GeneratorInputs in;
  std::vector<std::size_t> labels;
  for (auto i : sample_indices(m)) labels.push_back(ds_.seen_labels[i]);
  in.seen = seen_batch(std::move(labels));
  in.hallucinated = hallucinated_batch(m);
  if (lc.visual_pivot) {
    in.pivot.seen_semantics = ds_.seen_semantics;
    in.pivot.real_means = real_means_;
    in.pivot.z = sample_noise(rng_, ds_.k_seen() * lc.pivot_samples, model_.arch.noise_dim);
  }
  if (lc.u_categorization) in.unseen = hallucinated_batch(lc.k_unseen_cap);
  in.seen_semantics = ds_.seen_semantics;
  freeze_class_tables(model_.gen, in);

  ParamStore trainable = model_.gen;
  trainable.merge(model_.div);
  const ScalarGrad g = at_step(steps_ + 1, "generator", [&] {
    return grad_scalar(trainable, [&](ad::Tape& tape, const BoundParams& b) {
      BoundParams d(tape, model_.disc, false);
      const Nets nets{b, d, &b, model_.arch, model_.head, lc, signs_};
      return generator_loss(nets, in).total;
    });
  });
  adam_step(model_.gen, g.grads.subset("G."), adam_g_, cfg_.adam);
  ++g_updates_;
  if (!model_.div.empty()) {
    adam_step(model_.div, g.grads.subset("E."), adam_e_, cfg_.adam);
    ++e_updates_;
  }
  last_g_ = g.value;
  return g.value;
}

void Trainer::step() {
  for (std::size_t i = 0; i < cfg_.n_d; ++i) discriminator_step();
  generator_step();
  ++steps_;
}

TrainRecord Trainer::record() const {
  TrainRecord r;
  r.step = steps_;
  r.loss_g = last_g_;
  r.loss_d = last_d_;
  r.wasserstein = last_w_;
  EvalConfig ec;
  ec.n_generate = cfg_.n_generate_eval;
  ec.metric = cfg_.eval_metric;
  ec.seed = cfg_.seed;
  if (ds_.k_unseen() > 0 && !ds_.unseen_test_labels.empty()) {
    const EvalReport rep = evaluate_recognition(model_.gen, model_.arch, ds_, ec);
    r.top1 = rep.top1_unseen;
    r.auc = rep.su.auc;
  }
  const DivergenceSpec d = resolve(cfg_.loss.divergence, model_.div, signs_);
  r.gamma = d.gamma;
  r.beta = d.beta;
  return r;
}

TrainResult train(const ZslDataset& ds, const TrainConfig& cfg) {
  Trainer trainer(ds, cfg);
  TrainResult out;
  for (std::size_t s = 1; s <= cfg.n_steps; ++s) {
    trainer.step();
    if (s % cfg.eval_every == 0 || s == cfg.n_steps) out.history.records.push_back(trainer.record());
  }
  out.model = trainer.model();
  return out;
}

CrossValidation cross_validate(const ZslDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.lambda_grid.empty()) throw ValidationError("lambda_grid must not be empty");
  const std::size_t ks = ds.k_seen();
  if (ks < 5) throw ValidationError("cross-validation needs at least 5 seen classes, found " + std::to_string(ks));

  CrossValidation cv;
  std::vector<std::size_t> order(ks);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed, 5);
  for (std::size_t i = ks; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * double(ks))));
  cv.validation_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  cv.train_classes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(cv.validation_classes.begin(), cv.validation_classes.end());
  std::sort(cv.train_classes.begin(), cv.train_classes.end());
  const ZslDataset split = class_split(ds, cv.train_classes, cv.validation_classes);

  cv.curves.resize(cfg.lambda_grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    TrainConfig c = cfg;
    c.loss.lambda_creativity = cfg.lambda_grid[i];
    cv.curves[i] = {cfg.lambda_grid[i], train(split, c).history};
  }
  bool first = true;
  for (std::size_t i = 0; i < cv.curves.size(); ++i)
    for (const auto& r : cv.curves[i].history.records)
      if (first || r.auc > cv.best_auc) {
        first = false;
        cv.best_index = i;
        cv.best_auc = r.auc;
        cv.best_lambda = cv.curves[i].lambda;
        cv.best_step = r.step;
      }
  if (first) {
    // no records (n_steps == 0): fall back to the first grid entry
    cv.best_lambda = cfg.lambda_grid.front();
    cv.best_step = 0;
  }
  return cv;
}

SelectedModel select_and_train(const ZslDataset& ds, const TrainConfig& cfg) {
  SelectedModel out;
  out.cv = cross_validate(ds, cfg);
  TrainConfig c = cfg;
  c.loss.lambda_creativity = out.cv.best_lambda;
  c.n_steps = out.cv.best_step;
  out.final_run = train(ds, c);
  return out;
}

std::vector<std::string> ablation_suite_names() {
  return {"cizsl-v1-ablation", "hallucination-policies", "segc", "segc-rf", "hallucinated-categorization",
          "segc-normalization", "creativity-placement"};
}

std::vector<AblationBundle> ablation_suite(const std::string& name) {
  using C = TrainConfig;
  auto nothing = [](C&) {};
  auto family = [](DivergenceFamily f) {
    return [f](C& c) {
      c.loss.divergence.family = f;
      if (f == DivergenceFamily::Bhattacharyya || f == DivergenceFamily::KL) {
        c.loss.divergence.learn_gamma = false;
        c.loss.divergence.learn_beta = false;
      }
    };
  };
  auto segc = [](C& c) { c.loss.segc_active = true; };
  auto rf = [](C& c) { c.loss.rf_hallucinated = true; };

  if (name == "cizsl-v1-ablation")
    return {
        {"CIZSL SM-Entropy (ours final)", nothing},
        {"CIZSL SM-Entropy (replace 2nd term in Eq L_G^C by Classifying t^h as new class)",
         [](C& c) {
           c.loss.entropy_term = false;
           c.loss.new_class_ablation = true;
         }},
        {"CIZSL SM-Entropy (minus 1st term in Eq L_G^C)", [](C& c) { c.loss.realism_term = false; }},
        {"CIZSL SM-Entropy: (minus 2nd term in Eq L_G^C)", [](C& c) { c.loss.entropy_term = false; }},
        {"CIZSL Bachatera-Entropy (gamma=0.5, beta=0.5)", family(DivergenceFamily::Bhattacharyya)},
        {"CIZSL Renyi-Entropy (beta -> 1)", family(DivergenceFamily::Renyi)},
        {"CIZSL KL-Entropy (gamma -> 1, beta -> 1)", family(DivergenceFamily::KL)},
        {"CIZSL Tsallis-Entropy (beta = gamma)", family(DivergenceFamily::Tsallis)},
        {"CIZSL SM-Entropy: (minus 1st and 2nd terms in Eq L_G^C)= GAZSL",
         [](C& c) {
           c.loss.realism_term = false;
           c.loss.entropy_term = false;
         }},
    };
  if (name == "hallucination-policies") {
    std::vector<AblationBundle> out;
    const std::pair<const char*, HallucinationPolicy> rows[] = {
        {"Interpolate", HallucinationPolicy::interpolate()},
        {"Negative Extrapolate", HallucinationPolicy::neg_extrapolate()},
        {"Positive Extrapolate", HallucinationPolicy::pos_extrapolate()},
        {"Neg&Pos Extrapolate", HallucinationPolicy::neg_pos()},
        {"Interpolate & Extrapolate", HallucinationPolicy::all()}};
    for (const auto& [label, p] : rows) out.push_back({label, [p](C& c) { c.policy = p; }});
    return out;
  }
  if (name == "segc") return {{"CIZSL-v2", nothing}, {"CIZSL-v2+SeGC", segc}};
  if (name == "segc-rf")
    return {
        {"CIZSL-v2", nothing},
        {"CIZSL-v2+R/F Loss for t^h", rf},
        {"CIZSL-v2+SeGC", segc},
        {"CIZSL-v2+SeGC+R/F loss",
         [=](C& c) {
           segc(c);
           rf(c);
         }},
    };
  if (name == "hallucinated-categorization") {
    auto base = [](C& c) {
      c.loss.segc_active = true;
      c.loss.k_unseen_cap = 100;
    };
    return {{"K^u=100 (w/o)", base},
            {"K^u=100 (w/)", [=](C& c) {
               base(c);
               c.loss.u_categorization = true;
             }}};
  }
  if (name == "segc-normalization") {
    std::vector<AblationBundle> out{{"Standard (SD)", segc}};
    for (double eta : {1.0, 3.0, 5.0, 10.0, 20.0}) {
      char label[32];
      std::snprintf(label, sizeof label, "SD+Norm(eta=%g)", eta);
      out.push_back({label, [eta](C& c) {
                       c.loss.segc_active = true;
                       c.loss.segc_normalized = true;
                       c.loss.eta = eta;
                     }});
    }
    return out;
  }
  if (name == "creativity-placement")
    return {{"GAZSL + CIZSL-v2 on G", nothing},
            {"GAZSL + CIZSL-v2 on G and D", [](C& c) { c.loss.creativity_on_discriminator = true; }}};
  std::string known;
  for (const auto& n : ablation_suite_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValidationError("unknown ablation suite '" + name + "' (known: " + known + ")");
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= double(v.size());
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / double(v.size() - 1));
}

}  // namespace

std::vector<AblationRow> ablate(const ZslDataset& ds, const TrainConfig& cfg, const std::vector<AblationBundle>& suite,
                                const std::vector<std::uint64_t>& seeds, const EvalConfig& eval) {
  if (seeds.empty() && !suite.empty()) throw ValidationError("ablation needs at least one seed");
  // validate every bundle before any training
  for (const auto& b : suite) {
    TrainConfig c = cfg;
    b.apply(c);
    try {
      c.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("bundle '" + b.label + "': " + e.what());
    }
  }
  const std::size_t runs = suite.size() * seeds.size();
  std::vector<EvalReport> reports(runs);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < runs; ++r) {
    TrainConfig c = cfg;
    suite[r / seeds.size()].apply(c);
    c.seed = seeds[r % seeds.size()];
    const TrainResult res = train(ds, c);
    EvalConfig e = eval;
    e.seed = c.seed;
    reports[r] = evaluate_recognition(res.model.gen, res.model.arch, ds, e);
  }
  std::vector<AblationRow> rows;
  for (std::size_t b = 0; b < suite.size(); ++b) {
    AblationRow row;
    row.label = suite[b].label;
    row.seeds = seeds;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      row.top1.push_back(reports[b * seeds.size() + s].top1_unseen);
      row.auc.push_back(reports[b * seeds.size() + s].su.auc);
    }
    mean_std(row.top1, row.top1_mean, row.top1_std);
    mean_std(row.auc, row.auc_mean, row.auc_std);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  auto join = [](const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", v[i]);
      s += (i ? ";" : "") + std::string(buf);
    }
    return s;
  };
  std::string out = "label,seeds,top1_mean,top1_std,auc_mean,auc_std,top1_per_seed,auc_per_seed\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%zu,%.6f,%.6f,%.6f,%.6f,", r.seeds.size(), r.top1_mean, r.top1_std, r.auc_mean,
                  r.auc_std);
    out += quote(r.label) + buf + join(r.top1) + "," + join(r.auc) + "\n";
  }
  return out;
}

}  // namespace cizsl
