#include "coagdiff/scenario_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "coagdiff/oracles.hpp"

namespace coagdiff {
namespace {

using nlohmann::json;

const json& section(const json& doc, const char* key) {
  if (!doc.contains(key)) throw SchemaError(std::string("missing section '") + key + "'");
  const json& j = doc.at(key);
  if (!j.is_object()) throw SchemaError(std::string("section '") + key + "' must be an object");
  return j;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw SchemaError("unknown key '" + key + "' in " + where);
}

double num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw SchemaError(where + "." + key + " must be a number");
  return j.at(key).get<double>();
}

double num_or(const json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? num(j, key, where) : fallback;
}

int int_of(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw SchemaError(where + "." + key + " must be an integer");
  return j.at(key).get<int>();
}

int int_or(const json& j, const char* key, int fallback, const std::string& where) {
  return j.contains(key) ? int_of(j, key, where) : fallback;
}

std::array<double, 3> centre_of(const json& j, int dim, const std::string& where) {
  std::array<double, 3> c{0.0, 0.0, 0.0};
  if (!j.is_array() || j.size() != static_cast<std::size_t>(dim))
    throw SchemaError(where + ".center must be an array of grid.dim numbers");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(where + ".center must hold numbers");
    c[i] = j[i].get<double>();
  }
  return c;
}

// Splits a measure over classes 1..2M into live (<= M) and defect (> M) parts.
void split_initial(const ClassField& mu, Scenario& s) {
  const int m = s.model.num_classes();
  for (int k = 1; k <= mu.num_classes(); ++k) {
    const auto src = mu.cls(k);
    auto dst = k <= m ? s.kappa0.cls(k) : s.lambda0.cls(k);
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace

ClassField read_state_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                          int num_classes) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open initial state file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty initial state file " + path.string());
  std::string expected = "time,class";
  for (int a = 0; a < grid.dim(); ++a) expected += ",cell_" + std::to_string(a);
  expected += ",density";
  if (line != expected) throw SchemaError("state file header must be '" + expected + "'");
  ClassField mu(grid, num_classes);
  std::set<double> times;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cols;
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() != static_cast<std::size_t>(3 + grid.dim()))
      throw SchemaError("state file line " + std::to_string(lineno) + ": wrong column count");
    try {
      times.insert(std::stod(cols[0]));
      const int k = std::stoi(cols[1]);
      std::array<int, 3> idx{0, 0, 0};
      for (int a = 0; a < grid.dim(); ++a) {
        idx[static_cast<std::size_t>(a)] = std::stoi(cols[static_cast<std::size_t>(2 + a)]);
        if (idx[static_cast<std::size_t>(a)] < 0 || idx[static_cast<std::size_t>(a)] >= grid.cells_per_axis())
          throw SchemaError("state file line " + std::to_string(lineno) + ": cell index out of range");
      }
      if (k < 1 || k > num_classes)
        throw SchemaError("state file line " + std::to_string(lineno) + ": class outside 1..2M");
      const double d = std::stod(cols.back());
      if (!(d >= 0.0) || !std::isfinite(d))
        throw SchemaError("state file line " + std::to_string(lineno) + ": density must be >= 0");
      mu.at(k, grid.ravel(idx)) = d;
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const SchemaError*>(&e)) throw;
      throw SchemaError("state file line " + std::to_string(lineno) + ": unparsable number");
    }
  }
  if (times.size() > 1) throw SchemaError("state file must hold a single time");
  return mu;
}

ScenarioFile parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc, {"model", "grid", "init", "time", "outputs"}, "scenario");

  Model model = [&] {
    try {
      return model_from_json(section(doc, "model"));
    } catch (const ModelError& e) {
      throw SchemaError(std::string("model: ") + e.what());
    }
  }();

  const json& gj = section(doc, "grid");
  reject_unknown(gj, {"dim", "cells_per_axis", "length"}, "grid");
  const SpatialGrid grid = [&] {
    try {
      return SpatialGrid(int_of(gj, "dim", "grid"), int_of(gj, "cells_per_axis", "grid"),
                         num(gj, "length", "grid"));
    } catch (const ShapeError& e) {
      throw SchemaError(std::string("grid: ") + e.what());
    }
  }();

  const json& tj = section(doc, "time");
  reject_unknown(tj, {"dt", "t_end", "integrator", "picard_tol", "picard_kmax", "cadence",
                      "max_coag_substeps"},
                 "time");
  Scenario s = Scenario::with_initial(model, grid, ClassField(grid, model.num_classes()),
                                      num(tj, "dt", "time"), num(tj, "t_end", "time"));
  if (tj.contains("integrator")) {
    const json& ij = tj.at("integrator");
    const std::string name = ij.is_string() ? ij.get<std::string>() : "";
    if (name == "strang") s.integrator = Integrator::strang;
    else if (name == "duhamel") s.integrator = Integrator::duhamel;
    else throw SchemaError("time.integrator must be \"strang\" or \"duhamel\"");
  }
  s.picard_tol = num_or(tj, "picard_tol", s.picard_tol, "time");
  s.picard_kmax = int_or(tj, "picard_kmax", s.picard_kmax, "time");
  s.cadence = int_or(tj, "cadence", s.cadence, "time");
  s.max_coag_substeps = int_or(tj, "max_coag_substeps", s.max_coag_substeps, "time");

  InitSpec init;
  const json& ij = section(doc, "init");
  reject_unknown(ij, {"kind", "parameters"}, "init");
  if (!ij.contains("kind") || !ij.at("kind").is_string()) throw SchemaError("init.kind must be a string");
  init.kind = ij.at("kind").get<std::string>();
  const json params = ij.contains("parameters") ? ij.at("parameters") : json::object();
  const int top = model.table_classes();
  ClassField mu(grid, top);
  if (init.kind == "monodisperse") {
    reject_unknown(params, {"class", "density"}, "init.parameters");
    init.cls = int_or(params, "class", 1, "init.parameters");
    init.density = num_or(params, "density", 1.0, "init.parameters");
    if (init.cls < 1 || init.cls > top) throw SchemaError("init.parameters.class outside 1..2M");
    if (!(init.density >= 0.0)) throw SchemaError("init.parameters.density must be >= 0");
    for (double& x : mu.cls(init.cls)) x = init.density;
  } else if (init.kind == "profile") {
    reject_unknown(params, {"components"}, "init.parameters");
    if (!params.contains("components") || !params.at("components").is_array())
      throw SchemaError("init.parameters.components must be an array");
    for (const json& cj : params.at("components")) {
      const std::string where = "init.parameters.components[]";
      reject_unknown(cj, {"class", "background", "amplitude", "sigma", "center"}, where);
      InitComponent comp;
      comp.cls = int_of(cj, "class", where);
      comp.background = num_or(cj, "background", 0.0, where);
      comp.amplitude = num_or(cj, "amplitude", 0.0, where);
      if (comp.cls < 1 || comp.cls > top) throw SchemaError(where + ".class outside 1..2M");
      if (!(comp.background >= 0.0) || !(comp.amplitude >= 0.0))
        throw SchemaError(where + ": background and amplitude must be >= 0");
      auto dst = mu.cls(comp.cls);
      for (double& x : dst) x += comp.background;
      if (comp.amplitude > 0.0) {
        comp.sigma = num(cj, "sigma", where);
        if (!(comp.sigma > 0.0)) throw SchemaError(where + ".sigma must be positive");
        comp.centre = centre_of(cj.contains("center") ? cj.at("center") : json(), grid.dim(), where);
        const auto bump = gaussian_cell_average(grid, comp.sigma, comp.centre, comp.amplitude);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += bump[c];
      }
      init.components.push_back(comp);
    }
  } else if (init.kind == "file") {
    reject_unknown(params, {"path"}, "init.parameters");
    if (!params.contains("path") || !params.at("path").is_string())
      throw SchemaError("init.parameters.path must be a string");
    init.path = params.at("path").get<std::string>();
    if (init.path.is_relative()) init.path = base_dir / init.path;
    mu = read_state_csv(init.path, grid, top);
  } else {
    throw SchemaError("init.kind must be monodisperse, profile or file");
  }
  split_initial(mu, s);

  OutputSpec outputs;
  if (doc.contains("outputs")) {
    const json& oj = doc.at("outputs");
    reject_unknown(oj, {"dir", "snapshots"}, "outputs");
    if (oj.contains("dir")) {
      if (!oj.at("dir").is_string()) throw SchemaError("outputs.dir must be a string");
      outputs.dir = oj.at("dir").get<std::string>();
    }
    if (oj.contains("snapshots")) {
      if (!oj.at("snapshots").is_boolean()) throw SchemaError("outputs.snapshots must be a boolean");
      outputs.snapshots = oj.at("snapshots").get<bool>();
    }
  }

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  return ScenarioFile{std::move(s), std::move(init), std::move(outputs), doc};
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_scenario(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace coagdiff
