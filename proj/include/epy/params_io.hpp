#pragma once

#include <string>
#include <string_view>

#include "epy/ebayes.hpp"
#include "epy/species.hpp"

namespace epy {

// Parameter file:
//   {"variant": "dp|edp|epy", "alpha": num,
//    "families": [{"label": str, "sigma": num, "beta": num, "H": int|null}],
//    "default": {"sigma": num, "beta": num}}
// plus an optional "diagnostics" object written by `fit` and ignored on input.
std::string params_to_json(const FittedModel& model, const FitResult* fit = nullptr);
FittedModel params_from_json(std::string_view text);
FittedModel load_params(const std::string& path);

// Prior file; every key is optional and falls back to the default:
//   {"alpha": {"shape", "rate"}, "sigma": {"a", "b"}, "beta": {"shape", "rate"},
//    "dp_beta": {"shape", "rate"}}
PriorDensities priors_from_json(std::string_view text);
PriorDensities load_priors(const std::string& path);
std::string priors_to_json(const PriorDensities& prior);

}  // namespace epy
