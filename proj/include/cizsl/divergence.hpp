#pragma once

// Sharma-Mittal divergence family and the entropy loss L_e.
//
// Convention: SM_{g,b}(p||q) = 1/(b-1) * [ (sum_i p_i^g q_i^(1-g))^((1-b)/(1-g)) - 1 ]
// whose limits are
//   Renyi    (b -> 1):          1/(g-1) ln sum_i p_i^g q_i^(1-g)
//   Tsallis  (b -> g):          1/(g-1) (sum_i p_i^g q_i^(1-g) - 1)
//   KL       (g -> 1, b -> 1):  sum_i p_i ln(p_i / q_i)
//   g -> 1 with b fixed:        (exp((b-1) KL) - 1) / (b-1)
// Bhattacharyya is -ln sum_i sqrt(p_i q_i), which equals half the Renyi
// divergence of order 1/2 (and so half the SM limit at g -> 1/2, b -> 1).

#include <span>
#include <string>
#include <vector>

#include "cizsl/autodiff.hpp"
#include "cizsl/diffmath.hpp"

namespace cizsl {

enum class DivergenceFamily { SharmaMittal, Renyi, Tsallis, KL, Bhattacharyya };

/// Which argument the seen-class softmax occupies.
enum class Orientation { SoftmaxFirst, UniformFirst };

std::string to_string(DivergenceFamily f);
DivergenceFamily divergence_family_from_string(const std::string& s);
std::string to_string(Orientation o);
Orientation orientation_from_string(const std::string& s);

struct DivergenceSpec {
  DivergenceFamily family = DivergenceFamily::SharmaMittal;
  double gamma = 2.0;
  double beta = 2.0;
  bool learn_gamma = true;
  bool learn_beta = true;
  Orientation orientation = Orientation::SoftmaxFirst;

  /// Whether gamma / beta are free (learnable) for this family.
  bool gamma_is_learnable() const;
  bool beta_is_learnable() const;
  void validate() const;
};

/// Probabilities are clamped to [kProbabilityFloor, 1] and renormalized
/// before any power or logarithm is taken.
inline constexpr double kProbabilityFloor = 1e-12;
/// Distance from a singular parameter value below which a limit formula is used.
inline constexpr double kSingularThreshold = 1e-5;

/// Raw two-parameter formula, no routing; requires gamma != 1, beta != 1.
double sm_divergence(std::span<const double> p, std::span<const double> q, double gamma, double beta);
double renyi_divergence(std::span<const double> p, std::span<const double> q, double gamma);
double tsallis_divergence(std::span<const double> p, std::span<const double> q, double gamma);
double kl_divergence(std::span<const double> p, std::span<const double> q);
double bhattacharyya_divergence(std::span<const double> p, std::span<const double> q);

/// Divergence of the family named in `spec`, routing to the closed-form
/// limit whenever the parameters sit within kSingularThreshold of a
/// singular point.
double special_case(std::span<const double> p, std::span<const double> q, const DivergenceSpec& spec);

/// Divergence between a seen-class softmax and the uniform distribution.
double entropy_loss(std::span<const double> softmax, const DivergenceSpec& spec);

struct EntropyLossGrad {
  double value = 0.0;
  std::vector<double> d_softmax;
  double d_gamma = 0.0;  // zero unless gamma is learnable
  double d_beta = 0.0;   // zero unless beta is learnable
  double d_gamma_raw = 0.0;
  double d_beta_raw = 0.0;
};

/// Value and gradients of entropy_loss, including the derivative with
/// respect to the unconstrained parameters behind (gamma, beta).
EntropyLossGrad entropy_loss_grad(std::span<const double> softmax, const DivergenceSpec& spec);

// Learnable parameters. gamma and beta are stored unconstrained in a
// ParamStore ("E.gamma", "E.beta") and mapped through
//   gamma = 1 + softplus(u)         if the initial gamma > 1
//   gamma = sigmoid(u)              if the initial gamma < 1
//   beta  = 1 +/- softplus(v)       sign taken from the initial beta
// so gamma stays in (0, inf) \ {1} and beta != 1 while training.

/// Sign of (value - 1) recorded at initialization; +1 or -1.
struct DivergenceSigns {
  int gamma = 1;
  int beta = 1;
};

DivergenceSigns divergence_signs(const DivergenceSpec& spec);
ParamStore init_divergence_params(const DivergenceSpec& spec);
double gamma_from_raw(double raw, int sign);
double beta_from_raw(double raw, int sign);
double raw_from_gamma(double gamma);
double raw_from_beta(double beta);

/// Spec with gamma / beta replaced by the values held in `params`.
DivergenceSpec resolve(const DivergenceSpec& spec, const ParamStore& params, DivergenceSigns signs);

/// Per-row L_e for a batch of softmax rows (B x K) -> B x 1. When `params`
/// is non-null and the family has learnable parameters, the gradient flows
/// into "E.gamma" / "E.beta".
ad::Var entropy_loss_rows(ad::Tape& tape, ad::Var softmax, const DivergenceSpec& spec,
                          const BoundParams* params, DivergenceSigns signs);

}  // namespace cizsl
