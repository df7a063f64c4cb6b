#include "coagdiff/typespace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>

namespace coagdiff {
namespace {

constexpr double kRelTol = 1e-12;

bool leq_rel(double lhs, double rhs) {
  return lhs <= rhs + kRelTol * std::max(std::abs(lhs), std::abs(rhs));
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

}  // namespace

double PhiFamily::operator()(double m) const {
  switch (kind) {
    case Kind::es:
      return std::pow(m, 1.0 / 6.0) + std::pow(m, 5.0 / 6.0);
    case Kind::max_linear:
      return std::max(floor, m);
    case Kind::tabulated:
      break;
  }
  throw ModelError("tabulated phi cannot be evaluated off the class grid");
}

Model::Model(double mass_unit, int num_classes, int dim, std::vector<double> diffusivity,
             std::vector<double> weights, std::optional<std::vector<double>> v_weights,
             std::vector<double> kernel_table, KernelKind kind, PhiFamily phi,
             double constant_rate)
    : mass_unit_(mass_unit),
      num_classes_(num_classes),
      dim_(dim),
      diffusivity_(std::move(diffusivity)),
      weights_(std::move(weights)),
      v_weights_(std::move(v_weights)),
      kernel_(std::move(kernel_table)),
      kind_(kind),
      phi_(phi),
      constant_rate_(constant_rate) {
  require(num_classes_ >= 1, "num_classes must be >= 1");
  require(mass_unit_ > 0.0 && std::isfinite(mass_unit_), "mass_unit must be positive");
  require(dim_ >= 1 && dim_ <= 3, "dim must be 1, 2 or 3");
  const auto n = static_cast<std::size_t>(table_classes());
  require(diffusivity_.size() == n, "diffusivity must have 2M entries");
  require(weights_.size() == n, "weights must have 2M entries");
  require(kernel_.size() == n * n, "kernel table must be 2M x 2M");
  for (std::size_t k = 0; k < n; ++k) {
    require(diffusivity_[k] > 0.0 && std::isfinite(diffusivity_[k]),
            "diffusivity must be positive at class " + std::to_string(k + 1));
    require(weights_[k] > 0.0 && std::isfinite(weights_[k]),
            "weights must be positive at class " + std::to_string(k + 1));
  }
  if (v_weights_) {
    require(v_weights_->size() == n, "v_weights must have 2M entries");
    for (double v : *v_weights_) require(v >= 0.0 && std::isfinite(v), "v_weights must be >= 0");
  }
  for (double k : kernel_) require(k >= 0.0 && std::isfinite(k), "kernel entries must be >= 0");
}

Model Model::truncated(int m) const {
  require(m >= 1 && m <= num_classes_, "truncation level out of range");
  const auto n_old = static_cast<std::size_t>(table_classes());
  const auto n = static_cast<std::size_t>(2 * m);
  std::vector<double> a(diffusivity_.begin(), diffusivity_.begin() + static_cast<long>(n));
  std::vector<double> w(weights_.begin(), weights_.begin() + static_cast<long>(n));
  std::optional<std::vector<double>> v;
  if (v_weights_) v.emplace(v_weights_->begin(), v_weights_->begin() + static_cast<long>(n));
  std::vector<double> table(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) table[i * n + j] = kernel_[i * n_old + j];
  return Model(mass_unit_, m, dim_, std::move(a), std::move(w), std::move(v), std::move(table),
               kind_, phi_, constant_rate_);
}

Model Model::with_v_weights(std::optional<std::vector<double>> v) const {
  return Model(mass_unit_, num_classes_, dim_, diffusivity_, weights_, std::move(v), kernel_,
               kind_, phi_, constant_rate_);
}

Model build_es_model(int num_classes, double mass_unit) {
  require(num_classes >= 1, "num_classes must be >= 1");
  require(mass_unit > 0.0, "mass_unit must be positive");
  const int n = 2 * num_classes;
  const int dim = 3;
  std::vector<double> a(static_cast<std::size_t>(n)), w(a.size()), v(a.size());
  std::vector<double> cube_root(a.size());
  PhiFamily phi{PhiFamily::Kind::es, 0.0};
  for (int k = 1; k <= n; ++k) {
    const double m = k * mass_unit;
    const double r = std::cbrt(m);
    const auto i = static_cast<std::size_t>(k - 1);
    cube_root[i] = r;
    a[i] = 1.0 / r;
    // a^{3/2} phi(m) collapses to m^{-1/3} + m^{1/3}
    w[i] = 1.0 / r + r;
    v[i] = 2.0 / r;
  }
  std::vector<double> table(a.size() * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i; j < a.size(); ++j) {
      const double value = (a[i] + a[j]) * (cube_root[i] + cube_root[j]);
      table[i * a.size() + j] = value;
      table[j * a.size() + i] = value;
    }
  }
  return Model(mass_unit, num_classes, dim, std::move(a), std::move(w), std::move(v),
               std::move(table), KernelKind::es, phi);
}

Model build_constant_model(int num_classes, double mass_unit, double rate, double a_const,
                           int dim) {
  require(num_classes >= 1, "num_classes must be >= 1");
  require(rate >= 0.0 && std::isfinite(rate), "rate must be >= 0");
  require(a_const > 0.0 && std::isfinite(a_const), "diffusivity must be positive");
  require(dim >= 1 && dim <= 3, "dim must be 1, 2 or 3");
  const auto n = static_cast<std::size_t>(2 * num_classes);
  const double scale = std::pow(a_const, 0.5 * dim);
  PhiFamily phi{PhiFamily::Kind::max_linear, std::sqrt(rate) / scale};
  std::vector<double> a(n, a_const), w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = scale * phi(static_cast<double>(i + 1) * mass_unit);
  std::vector<double> table(n * n, rate);
  return Model(mass_unit, num_classes, dim, std::move(a), std::move(w), std::nullopt,
               std::move(table), KernelKind::constant, phi, rate);
}

Model build_table_model(int num_classes, double mass_unit, int dim,
                        std::vector<double> diffusivity, std::vector<double> weights,
                        std::optional<std::vector<double>> v_weights,
                        std::vector<double> kernel_table) {
  return Model(mass_unit, num_classes, dim, std::move(diffusivity), std::move(weights),
               std::move(v_weights), std::move(kernel_table), KernelKind::table,
               PhiFamily{PhiFamily::Kind::tabulated, 0.0});
}

SubadditivityResult check_subadditive(const std::vector<double>& f, int num_classes) {
  if (f.size() < static_cast<std::size_t>(2 * num_classes))
    throw ModelError("check_subadditive: f must cover classes 1..2M");
  for (int i = 1; i <= num_classes; ++i) {
    for (int j = i; j <= num_classes; ++j) {
      const double lhs = f[static_cast<std::size_t>(i + j - 1)];
      const double rhs = f[static_cast<std::size_t>(i - 1)] + f[static_cast<std::size_t>(j - 1)];
      if (lhs > rhs + 1e-12) return {false, i, j};
    }
  }
  return {};
}

AdmissibilityReport check_admissible(const Model& model) {
  AdmissibilityReport r;
  const int m_live = model.num_classes();
  const int n = model.table_classes();
  auto flag = [&r](bool& f, std::string name, int i, int j, double lhs, double rhs) {
    f = false;
    r.violations.push_back({std::move(name), i, j, lhs, rhs});
  };

  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      if (model.kernel(i, j) != model.kernel(j, i))
        flag(r.symmetric, "symmetric", i, j, model.kernel(i, j), model.kernel(j, i));

  double c_max = 0.0;
  if (model.has_v_weights())
    for (int k = 1; k <= n; ++k) c_max = std::max(c_max, model.v_weight(k) / model.weight(k));
  r.vw_present = model.has_v_weights();
  r.v_over_w_max = c_max;

  for (int i = 1; i <= m_live; ++i) {
    for (int j = 1; j <= m_live; ++j) {
      const double k_ij = model.kernel(i, j);
      const double ww = model.weight(i) * model.weight(j);
      r.worst_domination_ratio = std::max(r.worst_domination_ratio, k_ij / ww);
      if (!leq_rel(k_ij, ww)) flag(r.kernel_dominated, "kernel_dominated", i, j, k_ij, ww);

      const double a_sum = model.diffusivity(i + j);
      const double a_min = std::min(model.diffusivity(i), model.diffusivity(j));
      if (!leq_rel(a_sum, a_min))
        flag(r.diffusivity_K_decreasing, "diffusivity_K_decreasing", i, j, a_sum, a_min);

      if (r.vw_present) {
        const double bound = model.weight(i) * model.v_weight(j) + model.v_weight(i) * model.weight(j);
        if (bound > 0.0) r.worst_vw_ratio = std::max(r.worst_vw_ratio, k_ij / bound);
        else if (k_ij > 0.0) r.worst_vw_ratio = std::numeric_limits<double>::infinity();
        if (!leq_rel(k_ij, bound)) flag(r.vw_bound, "vw_bound", i, j, k_ij, bound);
      }
    }
  }

  // phi(lambda m) <= lambda phi(m) for lambda on a log grid in [1, 1e4]
  const PhiFamily& phi = model.phi();
  if (phi.evaluable()) {
    constexpr int kSamples = 97;
    for (int k = 1; k <= n; ++k) {
      const double m = model.mass(k);
      const double phi_m = phi(m);
      for (int s = 0; s < kSamples; ++s) {
        const double lambda = std::pow(10.0, 4.0 * s / (kSamples - 1));
        const double lhs = phi(lambda * m);
        const double rhs = lambda * phi_m;
        if (!leq_rel(lhs, rhs)) {
          flag(r.phi_sublinear_sampled, "phi_sublinear", k, s, lhs, rhs);
          break;
        }
      }
    }
  } else {
    const double half_d = 0.5 * model.dim();
    std::vector<double> phi_k(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k)
      phi_k[static_cast<std::size_t>(k - 1)] = model.weight(k) / std::pow(model.diffusivity(k), half_d);
    for (int i = 1; i <= n; ++i) {
      for (int k = i + 1; k <= n; ++k) {
        const double lhs = phi_k[static_cast<std::size_t>(k - 1)];
        const double rhs = model.mass(k) / model.mass(i) * phi_k[static_cast<std::size_t>(i - 1)];
        if (!leq_rel(lhs, rhs)) flag(r.phi_sublinear_sampled, "phi_sublinear", i, k, lhs, rhs);
      }
    }
  }

  if (r.vw_present) {
    const double half_d = 0.5 * model.dim();
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k)
      g[static_cast<std::size_t>(k - 1)] =
          std::pow(model.diffusivity(k), -half_d) * model.v_weight(k) * model.weight(k);
    const auto sub = check_subadditive(g, m_live);
    if (!sub.ok) {
      const auto i = static_cast<std::size_t>(sub.i - 1), j = static_cast<std::size_t>(sub.j - 1);
      flag(r.avw_subadditive, "avw_subadditive", sub.i, sub.j, g[i + j + 1], g[i] + g[j]);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw ModelError(std::string(where) + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ModelError(std::string("unknown key '") + key + "' in " + where);
}

std::vector<double> number_array(const json& j, const char* name) {
  if (!j.is_array()) throw ModelError(std::string(name) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ModelError(std::string(name) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void check_matches(const json& j, const char* key, const std::vector<double>& expected) {
  if (!j.contains(key)) return;
  const auto given = number_array(j.at(key), key);
  if (given.size() != expected.size())
    throw ModelError(std::string(key) + " length does not match the kernel family");
  for (std::size_t i = 0; i < given.size(); ++i)
    if (std::abs(given[i] - expected[i]) > 1e-12 * std::max(1.0, std::abs(expected[i])))
      throw ModelError(std::string(key) + " disagrees with the kernel family at class " +
                       std::to_string(i + 1));
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ModelError(std::string("missing numeric '") + key + "'");
  return j.at(key).get<double>();
}

int integer(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw ModelError(std::string("missing integer '") + key + "'");
  return j.at(key).get<int>();
}

}  // namespace

json model_to_json(const Model& model) {
  json j;
  j["dim"] = model.dim();
  j["mass_unit"] = model.mass_unit();
  j["num_classes"] = model.num_classes();
  j["diffusivity"] = model.diffusivities();
  j["weights"] = model.weights();
  j["v_weights"] = model.v_weights() ? json(*model.v_weights()) : json(nullptr);
  json kernel;
  switch (model.kernel_kind()) {
    case KernelKind::es:
      kernel["type"] = "es";
      break;
    case KernelKind::constant:
      kernel["type"] = "constant";
      kernel["rate"] = model.constant_rate();
      break;
    case KernelKind::table: {
      kernel["type"] = "table";
      const auto n = static_cast<std::size_t>(model.table_classes());
      json rows = json::array();
      for (std::size_t i = 0; i < n; ++i)
        rows.push_back(std::vector<double>(model.kernel_table().begin() + static_cast<long>(i * n),
                                           model.kernel_table().begin() + static_cast<long>((i + 1) * n)));
      kernel["table"] = rows;
      break;
    }
  }
  j["kernel"] = kernel;
  switch (model.phi().kind) {
    case PhiFamily::Kind::es:
      j["phi"] = {{"kind", "es"}};
      break;
    case PhiFamily::Kind::max_linear:
      j["phi"] = {{"kind", "max_linear"}, {"floor", model.phi().floor}};
      break;
    case PhiFamily::Kind::tabulated:
      j["phi"] = {{"kind", "tabulated"}};
      break;
  }
  return j;
}

Model model_from_json(const json& j) {
  reject_unknown(j, {"dim", "mass_unit", "num_classes", "diffusivity", "weights", "v_weights",
                     "kernel", "phi"},
                 "model");
  const int m = integer(j, "num_classes");
  const double mass_unit = j.contains("mass_unit") ? number(j, "mass_unit") : 1.0;
  if (!j.contains("kernel")) throw ModelError("model.kernel is required");
  const json& kj = j.at("kernel");
  reject_unknown(kj, {"type", "rate", "table"}, "model.kernel");
  if (!kj.contains("type") || !kj.at("type").is_string())
    throw ModelError("model.kernel.type must be a string");
  const std::string type = kj.at("type").get<std::string>();

  std::optional<std::vector<double>> v_override;
  const bool v_given = j.contains("v_weights");
  if (v_given && !j.at("v_weights").is_null()) v_override = number_array(j.at("v_weights"), "v_weights");

  auto apply_v = [&](Model model) {
    if (!v_given) return model;
    return model.with_v_weights(v_override);
  };
  if (j.contains("phi")) reject_unknown(j.at("phi"), {"kind", "floor"}, "model.phi");

  if (type == "es") {
    if (kj.contains("rate") || kj.contains("table"))
      throw ModelError("es kernel takes no rate or table");
    if (j.contains("dim") && integer(j, "dim") != 3) throw ModelError("es model requires dim = 3");
    Model model = build_es_model(m, mass_unit);
    check_matches(j, "diffusivity", model.diffusivities());
    check_matches(j, "weights", model.weights());
    return apply_v(std::move(model));
  }
  if (type == "constant") {
    if (kj.contains("table")) throw ModelError("constant kernel takes no table");
    const double rate = number(kj, "rate");
    const int dim = j.contains("dim") ? integer(j, "dim") : 1;
    double a = 1.0;
    if (j.contains("diffusivity")) {
      const json& dj = j.at("diffusivity");
      if (dj.is_number()) {
        a = dj.get<double>();
      } else {
        const auto arr = number_array(dj, "diffusivity");
        if (arr.empty()) throw ModelError("diffusivity must not be empty");
        a = arr.front();
        for (double x : arr)
          if (x != a) throw ModelError("constant model requires a constant diffusivity");
      }
    }
    Model model = build_constant_model(m, mass_unit, rate, a, dim);
    check_matches(j, "weights", model.weights());
    return apply_v(std::move(model));
  }
  if (type == "table") {
    if (kj.contains("rate")) throw ModelError("table kernel takes no rate");
    if (!kj.contains("table")) throw ModelError("table kernel requires 'table'");
    if (!j.contains("diffusivity") || !j.contains("weights"))
      throw ModelError("table model requires diffusivity and weights arrays");
    const int dim = integer(j, "dim");
    const auto n = static_cast<std::size_t>(2 * m);
    const json& rows = kj.at("table");
    if (!rows.is_array() || rows.size() != n) throw ModelError("kernel.table must have 2M rows");
    std::vector<double> table;
    table.reserve(n * n);
    for (const auto& row : rows) {
      const auto r = number_array(row, "kernel.table row");
      if (r.size() != n) throw ModelError("kernel.table rows must have 2M entries");
      table.insert(table.end(), r.begin(), r.end());
    }
    return build_table_model(m, mass_unit, dim, number_array(j.at("diffusivity"), "diffusivity"),
                             number_array(j.at("weights"), "weights"), v_override,
                             std::move(table));
  }
  throw ModelError("unknown kernel type '" + type + "'");
}

json report_to_json(const AdmissibilityReport& r) {
  json j;
  j["admissible"] = r.admissible();
  j["symmetric"] = r.symmetric;
  j["kernel_dominated"] = r.kernel_dominated;
  j["worst_domination_ratio"] = r.worst_domination_ratio;
  j["diffusivity_K_decreasing"] = r.diffusivity_K_decreasing;
  j["phi_sublinear_sampled"] = r.phi_sublinear_sampled;
  if (r.vw_present) {
    j["vw_bound"] = r.vw_bound;
    j["worst_vw_ratio"] = r.worst_vw_ratio;
    j["v_over_w_max"] = r.v_over_w_max;
    j["avw_subadditive"] = r.avw_subadditive;
  } else {
    j["vw_bound"] = nullptr;
    j["worst_vw_ratio"] = nullptr;
    j["v_over_w_max"] = nullptr;
    j["avw_subadditive"] = nullptr;
  }
  json v = json::array();
  for (const auto& x : r.violations)
    v.push_back({{"check", x.check}, {"i", x.i}, {"j", x.j}, {"lhs", x.lhs}, {"rhs", x.rhs}});
  j["violations"] = v;
  return j;
}

}  // namespace coagdiff
