#include "cizsl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cizsl/errors.hpp"

namespace cizsl {

namespace {

constexpr double kMinMaxRange = 1e-12;

ad::Tape& tape_of(const Nets& nets) {
  if (nets.gen.vars().empty()) throw ValidationError("generator parameters are empty");
  return nets.gen.vars().front().second.tape();
}

ad::Var zero(ad::Tape& tape) { return tape.constant(Tensor::scalar(0.0)); }

ad::Var generate_from(const Nets& nets, const Tensor& t, const Tensor& z) {
  ad::Tape& tape = tape_of(nets);
  return generate(nets.gen, nets.arch, tape.constant(t), tape.constant(z));
}

ad::Var class_table(const Nets& nets, const Tensor& table, const Tensor& semantics) {
  if (!nets.head.segc) return {};
  if (!table.empty()) return tape_of(nets).constant(table);
  return reduced_semantics(nets, semantics);
}

void check_batch(const Tensor& t, const Tensor& z, const char* what) {
  if (t.rows() == 0) throw ValidationError(std::string(what) + " batch is empty");
  if (t.rows() != z.rows()) throw DimensionError(std::string(what) + " text and noise batches differ in size");
}

}  // namespace

void LossConfig::validate() const {
  if (!std::isfinite(lambda_creativity) || lambda_creativity < 0.0)
    throw ValidationError("lambda_creativity must be finite and non-negative");
  if (new_class_ablation && entropy_term) throw ValidationError("new_class_ablation excludes entropy_term");
  if (new_class_ablation && segc_active) throw ValidationError("new_class_ablation needs the classic head");
  if (u_categorization && !segc_active) throw ValidationError("u_categorization needs segc_active");
  if (segc_normalized && !(eta > 0.0)) throw ValidationError("eta must be positive");
  if (k_unseen_cap < 2) throw ValidationError("k_unseen_cap must be at least 2");
  if (pivot_samples == 0) throw ValidationError("pivot_samples must be positive");
  divergence.validate();
}

HeadSpec LossConfig::head(std::size_t k_seen) const {
  return {.k_seen = k_seen, .segc = segc_active, .extra_class = new_class_ablation};
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : out) v = range < kMinMaxRange ? 0.0 : (v - min) / range;
  return out;
}

ad::Var minmax_normalize(ad::Var column) {
  if (column.value().empty()) throw ValidationError("min-max normalization of an empty batch");
  ad::Var lo = ad::min_all(column), hi = ad::max_all(column);
  if (hi.item() - lo.item() < kMinMaxRange) return column * 0.0;
  return ad::div(ad::sub(column, lo), ad::sub(hi, lo));
}

ad::Var cross_entropy(ad::Var log_probs, std::span<const std::size_t> labels) {
  if (labels.size() != log_probs.rows()) throw DimensionError("label count does not match the batch");
  if (labels.empty()) throw ValidationError("cross-entropy of an empty batch");
  Tensor onehot(log_probs.rows(), log_probs.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= log_probs.cols()) throw ValidationError("class label out of range");
    onehot(i, labels[i]) = 1.0;
  }
  return -ad::mean(ad::sum_cols(ad::mul(log_probs.tape().constant(std::move(onehot)), log_probs)));
}

ad::Var reduced_semantics(const Nets& nets, const Tensor& semantics) {
  ad::Tape& tape = tape_of(nets);
  ad::NoGradScope no_grad(tape);
  return reduce_text(nets.gen, tape.constant(semantics));
}

void freeze_class_tables(const ParamStore& gen, GeneratorInputs& in) {
  in.seen_table = reduce_semantics(gen, in.seen_semantics);
  if (!in.unseen.t.empty()) in.unseen_table = reduce_semantics(gen, in.unseen.t);
}

void freeze_class_tables(const ParamStore& gen, DiscriminatorInputs& in) {
  in.seen_table = reduce_semantics(gen, in.seen_semantics);
}

ad::Var class_log_probs(const Nets& nets, const DiscOutput& out, ad::Var class_semantics) {
  if (!nets.head.segc) return ad::log_softmax_rows(out.logits);
  return ad::log_softmax_rows(segc_scores(nets.disc["D.segc.W"], out.features, class_semantics,
                                          nets.cfg.segc_normalized, nets.cfg.eta));
}

ad::Var entropy_rows(const Nets& nets, const DiscOutput& out, ad::Var class_semantics) {
  ad::Var probs;
  if (nets.head.segc) {
    probs = ad::softmax_rows(segc_scores(nets.disc["D.segc.W"], out.features, class_semantics,
                                         nets.cfg.segc_normalized, nets.cfg.eta));
  } else {
    probs = ad::softmax_rows(ad::slice_cols(out.logits, 0, nets.head.k_seen));
  }
  return entropy_loss_rows(tape_of(nets), probs, nets.cfg.divergence, nets.div, nets.signs);
}

ad::Var creativity_loss(const Nets& nets, const TextNoiseBatch& hallucinated, const Tensor& seen_table) {
  check_batch(hallucinated.t, hallucinated.z, "hallucinated");
  ad::Tape& tape = tape_of(nets);
  const LossConfig& cfg = nets.cfg;
  ad::Var total = zero(tape);
  if (!cfg.realism_term && !cfg.entropy_term && !cfg.new_class_ablation) return total;

  const DiscOutput out = discriminate(nets.disc, nets.arch, nets.head, generate_from(nets, hallucinated.t, hallucinated.z));
  if (cfg.realism_term) total = total - ad::mean(out.critic);
  if (cfg.new_class_ablation) {
    const std::vector<std::size_t> extra(hallucinated.t.rows(), nets.head.k_seen);
    total = total + cfg.lambda_creativity * cross_entropy(class_log_probs(nets, out, {}), extra);
  } else if (cfg.entropy_term) {
    if (nets.head.segc && seen_table.empty()) throw ValidationError("SeGC creativity loss needs the class table");
    ad::Var le = entropy_rows(nets, out, class_table(nets, seen_table, {}));
    total = total + cfg.lambda_creativity * ad::mean(minmax_normalize(le));
  }
  return total;
}

ad::Var visual_pivot(const Nets& nets, const PivotInputs& pivot) {
  const std::size_t k = pivot.seen_semantics.rows();
  if (k == 0 || pivot.real_means.rows() != k) throw ValidationError("visual pivot needs one real mean per class");
  if (pivot.z.rows() == 0 || pivot.z.rows() % k != 0)
    throw ValidationError("visual pivot noise rows must be a multiple of the class count");
  const std::size_t n = pivot.z.rows() / k;
  Tensor t(k * n, pivot.seen_semantics.cols());
  Tensor avg(k, k * n);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < n; ++j) {
      const auto src = pivot.seen_semantics.row_span(c);
      std::copy(src.begin(), src.end(), t.row_span(c * n + j).begin());
      avg(c, c * n + j) = 1.0 / static_cast<double>(n);
    }
  ad::Tape& tape = tape_of(nets);
  ad::Var means = ad::matmul(tape.constant(std::move(avg)), generate_from(nets, t, pivot.z));
  return ad::mean(ad::sum_cols(ad::square(means - tape.constant(pivot.real_means))));
}

ad::Var segc_categorizer_loss(const Nets& nets, ad::Var features, std::span<const std::size_t> labels,
                              ad::Var class_semantics) {
  if (!nets.head.segc) throw ValidationError("SeGC categorizer loss needs segc_active");
  ad::Var scores = segc_scores(nets.disc["D.segc.W"], features, class_semantics, nets.cfg.segc_normalized,
                               nets.cfg.eta);
  return cross_entropy(ad::log_softmax_rows(scores), labels);
}

ad::Var hallucinated_categorization_loss(const Nets& nets, const TextNoiseBatch& unseen, const Tensor& table) {
  if (!nets.head.segc) throw ValidationError("hallucinated categorization needs segc_active");
  check_batch(unseen.t, unseen.z, "hallucinated categorization");
  const std::size_t k = unseen.t.rows();
  if (k < 2) throw ValidationError("hallucinated categorization needs at least 2 classes");
  const DiscOutput out = discriminate(nets.disc, nets.arch, nets.head, generate_from(nets, unseen.t, unseen.z));
  std::vector<std::size_t> own(k);
  for (std::size_t i = 0; i < k; ++i) own[i] = i;
  return segc_categorizer_loss(nets, out.features, own, class_table(nets, table, unseen.t));
}

GeneratorTerms generator_loss(const Nets& nets, const GeneratorInputs& in) {
  check_batch(in.seen.t, in.seen.z, "seen text");
  ad::Tape& tape = tape_of(nets);
  const LossConfig& cfg = nets.cfg;
  GeneratorTerms terms;
  const ad::Var classes = class_table(nets, in.seen_table, in.seen_semantics);
  terms.creativity = creativity_loss(nets, in.hallucinated, classes.valid() ? classes.value() : Tensor{});

  const DiscOutput out = discriminate(nets.disc, nets.arch, nets.head, generate_from(nets, in.seen.t, in.seen.z));
  terms.realism_seen = -ad::mean(out.critic);
  terms.classification = cross_entropy(class_log_probs(nets, out, classes), in.seen.y);
  terms.pivot = cfg.visual_pivot ? visual_pivot(nets, in.pivot) : zero(tape);
  terms.unseen_cat =
      cfg.u_categorization ? hallucinated_categorization_loss(nets, in.unseen, in.unseen_table) : zero(tape);
  terms.total = terms.creativity + terms.realism_seen + terms.classification + terms.pivot + terms.unseen_cat;
  return terms;
}

DiscriminatorTerms discriminator_loss(const Nets& nets, const DiscriminatorInputs& in) {
  check_batch(in.seen.t, in.seen.z, "seen text");
  if (in.real.x.rows() == 0) throw ValidationError("real batch is empty");
  ad::Tape& tape = tape_of(nets);
  const LossConfig& cfg = nets.cfg;
  DiscriminatorTerms terms;

  ad::Var classes = class_table(nets, in.seen_table, in.seen_semantics);
  const DiscOutput real = discriminate(nets.disc, nets.arch, nets.head, tape.constant(in.real.x));
  const DiscOutput fake = discriminate(nets.disc, nets.arch, nets.head, generate_from(nets, in.seen.t, in.seen.z));
  terms.fake = ad::mean(fake.critic);
  terms.real = -ad::mean(real.critic);
  terms.lipschitz = gradient_penalty(
      tape, [&](ad::Tape&, ad::Var x) { return discriminate(nets.disc, nets.arch, nets.head, x).critic; },
      in.interpolate, terms.degenerate_rows);
  terms.cls_real = 0.5 * cross_entropy(class_log_probs(nets, real, classes), in.real.y);
  terms.cls_fake = 0.5 * cross_entropy(class_log_probs(nets, fake, classes), in.seen.y);

  terms.hallucinated_rf = zero(tape);
  terms.creativity = zero(tape);
  if (cfg.rf_hallucinated || cfg.creativity_on_discriminator || cfg.new_class_ablation) {
    check_batch(in.hallucinated.t, in.hallucinated.z, "hallucinated");
    const DiscOutput hal =
        discriminate(nets.disc, nets.arch, nets.head, generate_from(nets, in.hallucinated.t, in.hallucinated.z));
    if (cfg.rf_hallucinated) terms.hallucinated_rf = ad::mean(hal.critic);
    if (cfg.new_class_ablation) {
      const std::vector<std::size_t> extra(in.hallucinated.t.rows(), nets.head.k_seen);
      terms.creativity = 0.5 * cross_entropy(class_log_probs(nets, hal, {}), extra);
    } else if (cfg.creativity_on_discriminator && cfg.entropy_term) {
      terms.creativity = cfg.lambda_creativity * ad::mean(minmax_normalize(entropy_rows(nets, hal, classes)));
    }
  }
  terms.total = terms.fake + terms.real + terms.lipschitz + terms.cls_real + terms.cls_fake + terms.hallucinated_rf +
                terms.creativity;
  return terms;
}

Tensor lipschitz_interpolate(const Tensor& x_real, const Tensor& x_fake, std::span<const double> u) {
  if (!x_real.same_shape(x_fake)) throw DimensionError("real and fake batches differ in shape");
  if (u.size() != x_real.rows()) throw DimensionError("one interpolation weight per row is required");
  Tensor out(x_real.rows(), x_real.cols());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = u[i] * x_real(i, j) + (1.0 - u[i]) * x_fake(i, j);
  return out;
}

Tensor lipschitz_interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng) {
  std::vector<double> u(x_real.rows());
  for (double& v : u) v = rng.uniform();
  return lipschitz_interpolate(x_real, x_fake, u);
}

}  // namespace cizsl
