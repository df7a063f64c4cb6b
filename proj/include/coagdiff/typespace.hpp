// Discrete type space: integer-mass classes, per-class diffusivity, the
// dominating weight w = a^{d/2} phi(m), and the coagulation kernel table.
//
// Classes are numbered 1..2M throughout the public API. Live particles occupy
// classes 1..M; the defect population may occupy any class in 1..2M, which is
// the largest mass a single pair of live particles can produce.
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace coagdiff {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class KernelKind { es, constant, table };

/// Sublinear mass weight: phi(lambda*m) <= lambda*phi(m) for lambda >= 1.
struct PhiFamily {
  enum class Kind {
    es,          // m^{1/6} + m^{5/6}
    max_linear,  // max(floor, m)
    tabulated,   // per-class values only
  };
  Kind kind = Kind::tabulated;
  double floor = 0.0;

  double operator()(double m) const;
  bool evaluable() const { return kind != Kind::tabulated; }
};

class Model {
 public:
  Model(double mass_unit, int num_classes, int dim, std::vector<double> diffusivity,
        std::vector<double> weights, std::optional<std::vector<double>> v_weights,
        std::vector<double> kernel_table, KernelKind kind, PhiFamily phi,
        double constant_rate = 0.0);

  double mass_unit() const { return mass_unit_; }
  /// Truncation level M (live classes 1..M).
  int num_classes() const { return num_classes_; }
  /// Classes with tabulated coefficients: 1..2M.
  int table_classes() const { return 2 * num_classes_; }
  int dim() const { return dim_; }
  KernelKind kernel_kind() const { return kind_; }
  const PhiFamily& phi() const { return phi_; }
  double constant_rate() const { return constant_rate_; }

  double mass(int k) const { return static_cast<double>(k) * mass_unit_; }
  double diffusivity(int k) const { return diffusivity_[idx(k)]; }
  double weight(int k) const { return weights_[idx(k)]; }
  bool has_v_weights() const { return v_weights_.has_value(); }
  double v_weight(int k) const { return (*v_weights_)[idx(k)]; }
  double kernel(int i, int j) const {
    return kernel_[idx(i) * static_cast<std::size_t>(table_classes()) + idx(j)];
  }

  const std::vector<double>& diffusivities() const { return diffusivity_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::optional<std::vector<double>>& v_weights() const { return v_weights_; }
  const std::vector<double>& kernel_table() const { return kernel_; }

  /// Same coefficients restricted to truncation level m <= num_classes().
  Model truncated(int m) const;
  /// Copy with replaced v weights (length 2M) or none.
  Model with_v_weights(std::optional<std::vector<double>> v) const;

 private:
  std::size_t idx(int k) const { return static_cast<std::size_t>(k - 1); }

  double mass_unit_;
  int num_classes_;
  int dim_;
  std::vector<double> diffusivity_;
  std::vector<double> weights_;
  std::optional<std::vector<double>> v_weights_;
  std::vector<double> kernel_;
  KernelKind kind_;
  PhiFamily phi_;
  double constant_rate_;
};

/// Einstein-Smoluchowski model in d = 3: a = m^{-1/3},
/// K = (m^{-1/3} + m'^{-1/3})(m^{1/3} + m'^{1/3}), phi = m^{1/6} + m^{5/6},
/// v = 2 m^{-1/3}.
Model build_es_model(int num_classes, double mass_unit);

/// Constant kernel and diffusivity; phi(m) = max(sqrt(rate) a^{-d/2}, m).
Model build_constant_model(int num_classes, double mass_unit, double rate, double a_const,
                           int dim);

/// Table kernel with explicit coefficients; phi is tabulated from the weights.
Model build_table_model(int num_classes, double mass_unit, int dim,
                        std::vector<double> diffusivity, std::vector<double> weights,
                        std::optional<std::vector<double>> v_weights,
                        std::vector<double> kernel_table);

struct Violation {
  std::string check;
  int i = 0;
  int j = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AdmissibilityReport {
  bool symmetric = true;
  bool kernel_dominated = true;
  double worst_domination_ratio = 0.0;
  bool diffusivity_K_decreasing = true;
  bool phi_sublinear_sampled = true;
  bool vw_present = false;
  bool vw_bound = true;
  double worst_vw_ratio = 0.0;
  double v_over_w_max = 0.0;
  bool avw_subadditive = true;
  std::vector<Violation> violations;

  /// Condition (A): symmetry, domination, K-decreasing diffusivity, sublinear phi.
  bool admissible() const {
    return symmetric && kernel_dominated && diffusivity_K_decreasing && phi_sublinear_sampled;
  }
};

AdmissibilityReport check_admissible(const Model& model);

struct SubadditivityResult {
  bool ok = true;
  int i = 0;
  int j = 0;
};

/// f over classes 1..2M (index k-1); true iff f_{i+j} <= f_i + f_j + 1e-12
/// for all i, j <= M.
SubadditivityResult check_subadditive(const std::vector<double>& f, int num_classes);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const AdmissibilityReport& report);

}  // namespace coagdiff
