#include "cizsl/model.hpp"

#include <cmath>

#include "cizsl/errors.hpp"

namespace cizsl {

namespace {

constexpr double kSlope = 0.2;

void add_affine(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w(in, out);
  for (double& v : w.storage()) v = static_cast<float>(scale * rng.normal());
  store.add(name + ".W", std::move(w));
  store.add(name + ".b", Tensor(1, out));
}

ad::Var affine(const BoundParams& p, const std::string& name, ad::Var x) {
  return ad::add(ad::matmul(x, p[name + ".W"]), p[name + ".b"]);
}

void require_width(ad::Var v, std::size_t width, const char* what) {
  if (v.cols() != width)
    throw DimensionError(std::string(what) + " has width " + std::to_string(v.cols()) + ", expected " +
                         std::to_string(width));
}

// Rows whose squared norm is below this are treated as zero vectors.
constexpr double kZeroNormSq = 1e-24;

ad::Var unit_rows(ad::Var a, std::size_t* degenerate) {
  ad::Var sq = ad::sum_cols(ad::square(a));
  Tensor fill(sq.rows(), 1);
  for (std::size_t i = 0; i < sq.rows(); ++i)
    if (sq.value()(i, 0) < kZeroNormSq) {
      fill(i, 0) = 1.0;
      if (degenerate != nullptr) ++*degenerate;
    }
  return ad::div(a, ad::sqrt(ad::add(sq, a.tape().constant(std::move(fill)))));
}

}  // namespace

std::string to_string(ArchPreset p) {
  switch (p) {
    case ArchPreset::Base: return "base";
    case ArchPreset::DoubleNet: return "double_net";
    case ArchPreset::DoubleNetReduced: return "double_net_reduced";
  }
  return "unknown";
}

ArchPreset arch_preset_from_string(const std::string& s) {
  for (auto p : {ArchPreset::Base, ArchPreset::DoubleNet, ArchPreset::DoubleNetReduced})
    if (to_string(p) == s) return p;
  throw ValidationError("unknown architecture preset '" + s + "'");
}

std::size_t ArchSpec::hidden_layers() const { return preset == ArchPreset::Base ? 1 : 2; }

std::size_t ArchSpec::effective_hidden_dim() const {
  return preset == ArchPreset::DoubleNetReduced ? std::max<std::size_t>(1, hidden_dim / 2) : hidden_dim;
}

std::size_t ArchSpec::effective_reduced_dim() const {
  return reduced_dim != 0 ? reduced_dim : (semantic_dim + 1) / 2;
}

void ArchSpec::validate() const {
  if (semantic_dim == 0 || noise_dim == 0 || visual_dim == 0 || hidden_dim == 0)
    throw ValidationError("architecture dimensions must be positive");
  if (effective_reduced_dim() > semantic_dim) throw ValidationError("reduced_dim must not exceed semantic_dim");
}

std::string arch_tag(const ArchSpec& arch, const HeadSpec& head) {
  return to_string(arch.preset) + "/s" + std::to_string(arch.semantic_dim) + "/r" +
         std::to_string(arch.effective_reduced_dim()) + "/z" + std::to_string(arch.noise_dim) + "/v" +
         std::to_string(arch.visual_dim) + "/h" + std::to_string(arch.effective_hidden_dim()) + "x" +
         std::to_string(arch.hidden_layers()) + "/k" + std::to_string(head.k_seen) +
         (head.segc ? "/segc" : "/cls") + (head.extra_class ? "+1" : "");
}

ParamStore init_generator(const ArchSpec& arch, Rng& rng) {
  arch.validate();
  ParamStore g;
  const std::size_t red = arch.effective_reduced_dim(), hid = arch.effective_hidden_dim();
  add_affine(g, "G.reduce", arch.semantic_dim, red, rng);
  std::size_t in = red + arch.noise_dim;
  for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
    add_affine(g, "G.h" + std::to_string(l), in, hid, rng);
    in = hid;
  }
  add_affine(g, "G.out", in, arch.visual_dim, rng);
  return g;
}

ParamStore init_discriminator(const ArchSpec& arch, const HeadSpec& head, Rng& rng) {
  arch.validate();
  if (head.k_seen < 2) throw ValidationError("discriminator needs at least 2 seen classes");
  ParamStore d;
  const std::size_t hid = arch.effective_hidden_dim();
  std::size_t in = arch.visual_dim;
  for (std::size_t l = 0; l < arch.hidden_layers(); ++l) {
    add_affine(d, "D.h" + std::to_string(l), in, hid, rng);
    in = hid;
  }
  add_affine(d, "D.rf", hid, 1, rng);
  if (head.segc) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(hid));
    Tensor w(hid, arch.effective_reduced_dim());
    for (double& v : w.storage()) v = static_cast<float>(scale * rng.normal());
    d.add("D.segc.W", std::move(w));
  } else {
    add_affine(d, "D.cls", hid, head.classic_outputs(), rng);
  }
  return d;
}

ad::Var reduce_text(const BoundParams& gen, ad::Var t) { return affine(gen, "G.reduce", t); }

ad::Var generate(const BoundParams& gen, const ArchSpec& arch, ad::Var t, ad::Var z) {
  require_width(t, arch.semantic_dim, "semantic input");
  require_width(z, arch.noise_dim, "noise input");
  if (t.rows() != z.rows()) throw DimensionError("semantic and noise batches differ in size");
  ad::Var h = ad::concat_cols(reduce_text(gen, t), z);
  for (std::size_t l = 0; l < arch.hidden_layers(); ++l)
    h = ad::leaky_relu(affine(gen, "G.h" + std::to_string(l), h), kSlope);
  return affine(gen, "G.out", h);
}

DiscOutput discriminate(const BoundParams& disc, const ArchSpec& arch, const HeadSpec& head, ad::Var x) {
  require_width(x, arch.visual_dim, "visual input");
  ad::Var h = x;
  for (std::size_t l = 0; l < arch.hidden_layers(); ++l)
    h = ad::leaky_relu(affine(disc, "D.h" + std::to_string(l), h), kSlope);
  DiscOutput out;
  out.features = h;
  out.critic = affine(disc, "D.rf", h);
  if (!head.segc) out.logits = affine(disc, "D.cls", h);
  return out;
}

ad::Var segc_scores(ad::Var w, ad::Var features, ad::Var semantics, bool normalized, double eta,
                    std::size_t* degenerate) {
  if (features.cols() != w.rows()) throw DimensionError("SeGC projection does not match the feature width");
  if (semantics.cols() != w.cols()) throw DimensionError("SeGC projection does not match the semantic width");
  ad::Var proj = ad::matmul(features, w);
  if (!normalized) return ad::matmul(proj, semantics, false, true);
  if (!(eta > 0.0)) throw ValidationError("SeGC scale eta must be positive");
  ad::Var a = unit_rows(proj, degenerate);
  ad::Var b = unit_rows(semantics, degenerate);
  return ad::matmul(a, b, false, true) * (eta * eta);
}

Tensor sample_noise(Rng& rng, std::size_t n, std::size_t dim) {
  Tensor z(n, dim);
  for (double& v : z.storage()) v = rng.normal();
  return z;
}

Tensor generate_features(const ParamStore& gen, const ArchSpec& arch, const Tensor& t, const Tensor& z) {
  ad::Tape tape;
  BoundParams g(tape, gen, false);
  return generate(g, arch, tape.constant(t), tape.constant(z)).value();
}

Tensor reduce_semantics(const ParamStore& gen, const Tensor& t) {
  ad::Tape tape;
  BoundParams g(tape, gen, false);
  return reduce_text(g, tape.constant(t)).value();
}

Tensor segc_score(const Tensor& w, const Tensor& features, const Tensor& semantics, bool normalized, double eta,
                  std::size_t* degenerate) {
  ad::Tape tape;
  return segc_scores(tape.constant(w), tape.constant(features), tape.constant(semantics), normalized, eta, degenerate)
      .value();
}

}  // namespace cizsl
