#include "epy/params_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "epy/error.hpp"

namespace epy {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

double number(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number())
    throw ParseError(std::string("missing or non-numeric '") + key + "'", 0);
  return obj[key].get<double>();
}

std::optional<int> optional_h(const json& obj) {
  if (!obj.contains("H") || obj["H"].is_null()) return std::nullopt;
  if (!obj["H"].is_number_integer()) throw ParseError("'H' must be an integer or null", 0);
  return obj["H"].get<int>();
}

json params_json(const PyParams& p) {
  json j{{"sigma", p.sigma()}, {"beta", p.beta()}};
  j["H"] = p.H() ? json(*p.H()) : json(nullptr);
  return j;
}

}  // namespace

std::string params_to_json(const FittedModel& model, const FitResult* fit) {
  json j;
  j["variant"] = to_string(model.variant);
  j["alpha"] = model.variant == ModelVariant::DP ? 0.0 : model.alpha;
  j["families"] = json::array();
  for (const auto& [label, p] : model.families) {
    json f = params_json(p);
    f["label"] = label;
    j["families"].push_back(f);
  }
  j["default"] = params_json(model.default_params);
  if (fit) {
    json d;
    d["alpha_objective"] = fit->alpha_objective;
    d["alpha_iterations"] = fit->alpha_iterations;
    d["families"] = json::array();
    for (std::size_t r = 0; r < fit->families.size(); ++r) {
      const auto& f = fit->families[r];
      d["families"].push_back({{"label", fit->labels[r]},
                               {"objective", f.objective},
                               {"iterations", f.iterations},
                               {"restarts", f.restarts},
                               {"converged_starts", f.converged_starts},
                               {"tolerance_achieved", f.tolerance_achieved},
                               {"sigma_at_boundary", f.sigma_at_boundary},
                               {"beta_at_boundary", f.beta_at_boundary}});
    }
    d["warnings"] = fit->warnings;
    j["diagnostics"] = d;
  }
  return j.dump(2) + "\n";
}

FittedModel params_from_json(std::string_view text) {
  const json j = parse(text);
  if (!j.is_object()) throw ParseError("parameter file must be a JSON object", 0);
  if (!j.contains("variant") || !j["variant"].is_string()) throw ParseError("missing 'variant'", 0);
  FittedModel m;
  try {
    m.variant = parse_variant(j["variant"].get<std::string>());
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  m.alpha = number(j, "alpha");
  if (m.variant != ModelVariant::DP && !(m.alpha > 0.0)) throw DomainError("alpha must be positive");
  if (!j.contains("families") || !j["families"].is_array()) throw ParseError("missing 'families' array", 0);
  for (const auto& f : j["families"]) {
    if (!f.contains("label") || !f["label"].is_string()) throw ParseError("family entry without 'label'", 0);
    const auto label = f["label"].get<std::string>();
    if (!m.families.emplace(label, validate_py_params(number(f, "sigma"), number(f, "beta"), optional_h(f))).second)
      throw ParseError("duplicate family label '" + label + "'", 0);
  }
  if (!j.contains("default")) throw ParseError("missing 'default'", 0);
  const auto& d = j["default"];
  m.default_params = validate_py_params(number(d, "sigma"), number(d, "beta"), optional_h(d));
  if (m.variant == ModelVariant::DP && !m.families.count(kPooledFamily))
    throw ParseError("dp parameter file needs the pooled family '" + kPooledFamily + "'", 0);
  return m;
}

FittedModel load_params(const std::string& path) { return params_from_json(read_file(path)); }

PriorDensities priors_from_json(std::string_view text) {
  const json j = parse(text);
  if (!j.is_object()) throw ParseError("prior file must be a JSON object", 0);
  PriorDensities p;
  auto gamma = [&](const char* key, GammaPrior& g) {
    if (!j.contains(key)) return;
    g.shape = number(j[key], "shape");
    g.rate = number(j[key], "rate");
  };
  gamma("alpha", p.alpha);
  gamma("beta", p.beta);
  gamma("dp_beta", p.dp_beta);
  if (j.contains("sigma")) {
    p.sigma.a = number(j["sigma"], "a");
    p.sigma.b = number(j["sigma"], "b");
  }
  p.validate();
  return p;
}

PriorDensities load_priors(const std::string& path) { return priors_from_json(read_file(path)); }

std::string priors_to_json(const PriorDensities& p) {
  json j{{"alpha", {{"shape", p.alpha.shape}, {"rate", p.alpha.rate}}},
         {"sigma", {{"a", p.sigma.a}, {"b", p.sigma.b}}},
         {"beta", {{"shape", p.beta.shape}, {"rate", p.beta.rate}}},
         {"dp_beta", {{"shape", p.dp_beta.shape}, {"rate", p.dp_beta.rate}}}};
  return j.dump(2) + "\n";
}

}  // namespace epy
