#include "epy/species.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "epy/error.hpp"

namespace epy {

namespace {

std::string pair_key(const Label& family, const Label& species) { return family + '\x1f' + species; }

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw ParseError("characters after closing quote", line_no);
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::int64_t SpeciesDataset::n() const {
  std::int64_t n = 0;
  for (const auto& r : records) n += r.count;
  return n;
}

std::size_t SpeciesDataset::k_x() const {
  std::unordered_set<Label> fams;
  for (const auto& r : records) fams.insert(r.family);
  return fams.size();
}

NestedPartitionState SpeciesDataset::state() const { return state_from_counts(records); }

SpeciesDataset parse_csv(std::istream& in) {
  SpeciesDataset out;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (line != "family,species,count") throw ParseError("expected header 'family,species,count'", line_no);
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != 3) throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), line_no);
    if (fields[0].empty() || fields[1].empty()) throw ParseError("empty family or species", line_no);
    std::int64_t count = 0;
    const auto& cs = fields[2];
    const auto res = std::from_chars(cs.data(), cs.data() + cs.size(), count);
    if (res.ec != std::errc() || res.ptr != cs.data() + cs.size())
      throw ParseError("count '" + cs + "' is not an integer", line_no);
    if (count < 1) throw ParseError("count must be positive, got " + cs, line_no);
    const auto key = pair_key(fields[0], fields[1]);
    if (auto it = index.find(key); it != index.end()) {
      out.records[it->second].count += count;
      out.warnings.push_back("line " + std::to_string(line_no) + ": repeated pair (" + fields[0] + ", " +
                             fields[1] + ") summed");
    } else {
      index.emplace(key, out.records.size());
      out.records.push_back({fields[0], fields[1], count});
    }
  }
  if (!header) throw ParseError("missing header 'family,species,count'", line_no == 0 ? 1 : line_no);
  return out;
}

SpeciesDataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return parse_csv(in);
}

SpeciesDataset dataset_from_sequence(std::span<const Observation> sequence) {
  SpeciesDataset out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& o : sequence) {
    const auto key = pair_key(o.family, o.species);
    if (auto it = index.find(key); it != index.end()) {
      ++out.records[it->second].count;
    } else {
      index.emplace(key, out.records.size());
      out.records.push_back({o.family, o.species, 1});
    }
  }
  return out;
}

TrainTestSplit split_train_test(const SpeciesDataset& data, std::int64_t n_train, std::uint64_t seed) {
  const std::int64_t n = data.n();
  if (n_train < 1 || n_train > n)
    throw DomainError("n_train must lie in [1, " + std::to_string(n) + "], got " + std::to_string(n_train));
  std::vector<std::uint32_t> obs;
  obs.reserve(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < data.records.size(); ++i)
    obs.insert(obs.end(), static_cast<std::size_t>(data.records[i].count), static_cast<std::uint32_t>(i));
  Stream stream(seed, 0);
  for (std::size_t i = obs.size(); i > 1; --i) std::swap(obs[i - 1], obs[stream.below(i)]);

  TrainTestSplit out;
  for (std::int64_t t = 0; t < n_train; ++t) {
    const auto& rec = data.records[obs[static_cast<std::size_t>(t)]];
    auto r = out.train.find_family(rec.family);
    if (!r) r = out.train.add_family(rec.family, PyParams{});
    out.train.add_to_dish(*r, rec.species);
  }
  out.test.reserve(static_cast<std::size_t>(n - n_train));
  for (std::int64_t t = n_train; t < n; ++t) {
    const auto& rec = data.records[obs[static_cast<std::size_t>(t)]];
    out.test.push_back({rec.family, rec.species});
  }
  return out;
}

std::vector<std::int64_t> default_grid(std::int64_t m_max, int points) {
  if (m_max < 1) return {0};
  points = std::max(points, 1);
  std::vector<std::int64_t> grid;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    auto m = static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(m_max), t)));
    m = std::clamp<std::int64_t>(m, 1, m_max);
    if (grid.empty() || m > grid.back()) grid.push_back(m);
  }
  if (grid.back() != m_max) grid.push_back(m_max);
  return grid;
}

FittedModel fitted_model(const FitResult& fit) {
  FittedModel m;
  m.variant = fit.variant;
  m.alpha = fit.alpha_hat;
  for (std::size_t r = 0; r < fit.families.size(); ++r)
    m.families[fit.labels[r]] = PyParams::make(fit.families[r].sigma, fit.families[r].beta);
  if (fit.variant == ModelVariant::DP)
    m.default_params = m.families.at(kPooledFamily);
  else
    m.default_params = PyParams::make(fit.default_family.sigma, fit.default_family.beta);
  return m;
}

NestedPartitionState prediction_state(const NestedPartitionState& state, const FittedModel& model) {
  auto params_for = [&](const Label& x) {
    auto it = model.families.find(x);
    return it == model.families.end() ? model.default_params : it->second;
  };
  if (model.variant == ModelVariant::DP || model.alpha == 0.0) {
    NestedPartitionState pooled;
    const auto r = pooled.add_family(kPooledFamily, params_for(kPooledFamily));
    std::int64_t j = 0;
    for (const auto& f : state.families())
      for (const auto& d : f.dishes) pooled.add_to_dish(r, std::to_string(j++), d.count);
    return pooled;
  }
  NestedPartitionState out = state;
  for (std::size_t r = 0; r < out.k_x(); ++r) out.set_params(r, params_for(out.family(r).label));
  return out;
}

void RunConfig::validate() const {
  prior.validate();
  if (reps < 1) throw DomainError("reps must be >= 1");
  for (double q : quantiles)
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile levels must lie in (0, 1)");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] < 0 || (i > 0 && grid[i] <= grid[i - 1]))
      throw DomainError("m-grid must be nonnegative and strictly increasing");
  if (n_train < 0) throw DomainError("n_train must be >= 0");
  if (threads < 0) throw DomainError("threads must be >= 0");
}

double quantile_sorted(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

PredictionCurve run_curve(const NestedPartitionState& state, const FittedModel& model, const RunConfig& config,
                          bool parallel) {
  config.validate();
  if (config.grid.empty()) throw DomainError("predict_curve: empty m-grid");
  const auto prepared = prediction_state(state, model);
  const double alpha = model.variant == ModelVariant::DP ? 0.0 : model.alpha;
  const DiscoveryKernel kernel(prepared, alpha, model.default_params);

  const std::size_t g = config.grid.size();
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::int64_t> ky(reps * g), kx(reps * g);
  auto one = [&](std::size_t rep) {
    Stream stream(config.seed, rep);
    kernel.run(config.grid, stream, std::span(ky).subspan(rep * g, g), std::span(kx).subspan(rep * g, g));
  };
  if (parallel) {
    const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
    const long nreps = static_cast<long>(reps);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long rep = 0; rep < nreps; ++rep) one(static_cast<std::size_t>(rep));
  } else {
    for (std::size_t rep = 0; rep < reps; ++rep) one(rep);
  }

  PredictionCurve out;
  out.grid = config.grid;
  out.reps = config.reps;
  out.seed = config.seed;
  out.mean_ky.assign(g, 0.0);
  out.mean_kx.assign(g, 0.0);
  for (double q : config.quantiles) out.quantiles_ky[q].assign(g, 0.0);
  std::vector<double> col(reps);
  for (std::size_t i = 0; i < g; ++i) {
    double sy = 0.0, sx = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      col[rep] = static_cast<double>(ky[rep * g + i]);
      sy += col[rep];
      sx += static_cast<double>(kx[rep * g + i]);
    }
    out.mean_ky[i] = sy / static_cast<double>(reps);
    out.mean_kx[i] = sx / static_cast<double>(reps);
    std::sort(col.begin(), col.end());
    for (auto& [q, values] : out.quantiles_ky) values[i] = quantile_sorted(col, q);
  }
  return out;
}

}  // namespace

PredictionCurve predict_curve(const NestedPartitionState& state, const FittedModel& model, const RunConfig& config) {
  return run_curve(state, model, config, true);
}

PredictionCurve predict_curve_serial(const NestedPartitionState& state, const FittedModel& model,
                                     const RunConfig& config) {
  return run_curve(state, model, config, false);
}

DiscoveryCurve count_new_in_test(const NestedPartitionState& train, std::span<const Observation> test) {
  std::unordered_set<std::string> species;
  std::unordered_set<Label> families;
  for (const auto& f : train.families()) {
    families.insert(f.label);
    for (const auto& d : f.dishes) species.insert(pair_key(f.label, d.label));
  }
  DiscoveryCurve out;
  out.new_species.reserve(test.size());
  out.new_families.reserve(test.size());
  std::int64_t ky = 0, kx = 0;
  for (const auto& o : test) {
    ky += species.insert(pair_key(o.family, o.species)).second;
    kx += families.insert(o.family).second;
    out.new_species.push_back(ky);
    out.new_families.push_back(kx);
  }
  return out;
}

ComparisonReport compare_models(const SpeciesDataset& data, const RunConfig& config) {
  config.validate();
  const std::int64_t n = data.n();
  const std::int64_t n_train = config.n_train > 0 ? config.n_train : n / 2;
  const auto split = split_train_test(data, n_train, config.seed);
  const auto actual = count_new_in_test(split.train, split.test);
  const auto n_test = static_cast<std::int64_t>(split.test.size());

  ComparisonReport report;
  report.grid = config.grid.empty() ? default_grid(n_test) : config.grid;
  if (report.grid.back() > n_test) throw DomainError("m-grid exceeds the test sample size");
  for (auto m : report.grid) report.actual_ky.push_back(m == 0 ? 0 : actual.new_species[static_cast<std::size_t>(m - 1)]);

  FitOptions options;
  options.threads = config.threads;
  RunConfig rc = config;
  rc.grid = report.grid;
  for (auto v : {ModelVariant::DP, ModelVariant::EDP, ModelVariant::EPY}) {
    ModelComparison mc;
    mc.variant = v;
    mc.fit = fit_model(split.train, config.prior, v, options);
    mc.curve = predict_curve(split.train, fitted_model(mc.fit), rc);
    double err = 0.0;
    for (std::size_t i = 0; i < report.grid.size(); ++i)
      err += std::abs(mc.curve.mean_ky[i] - static_cast<double>(report.actual_ky[i]));
    mc.mae = err / static_cast<double>(report.grid.size());
    report.models.push_back(std::move(mc));
  }
  return report;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_curve_csv(std::ostream& out, const PredictionCurve& curve) {
  out << "m,mean_ky,mean_kx";
  for (const auto& [q, _] : curve.quantiles_ky) out << ",q" << format_number(q);
  out << '\n';
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    out << curve.grid[i] << ',' << format_number(curve.mean_ky[i]) << ',' << format_number(curve.mean_kx[i]);
    for (const auto& [_, values] : curve.quantiles_ky) out << ',' << format_number(values[i]);
    out << '\n';
  }
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
  out << "m,actual_ky";
  for (const auto& mc : report.models) {
    const auto name = to_string(mc.variant);
    out << ',' << name << "_mean_ky";
    for (const auto& [q, _] : mc.curve.quantiles_ky) out << ',' << name << "_q" << format_number(q);
  }
  out << '\n';
  for (std::size_t i = 0; i < report.grid.size(); ++i) {
    out << report.grid[i] << ',' << report.actual_ky[i];
    for (const auto& mc : report.models) {
      out << ',' << format_number(mc.curve.mean_ky[i]);
      for (const auto& [_, values] : mc.curve.quantiles_ky) out << ',' << format_number(values[i]);
    }
    out << '\n';
  }
}

std::vector<Observation> simulate_sequence(const EpyModel& model, std::int64_t n, Stream& stream) {
  NestedPartitionState state;
  std::vector<Observation> seq;
  seq.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  for (std::int64_t t = 0; t < n; ++t) {
    auto o = step(state, model, stream);
    seq.push_back({std::move(o.x), std::move(o.y)});
  }
  return seq;
}

SpeciesDataset simulate_dataset(const EpyModel& model, std::int64_t n, std::uint64_t seed) {
  Stream stream(seed, 0);
  const auto seq = simulate_sequence(model, n, stream);
  return dataset_from_sequence(seq);
}

std::vector<std::int64_t> simulate_py_counts(const PyParams& params, std::int64_t n, Stream& stream) {
  std::vector<std::int64_t> counts;
  std::vector<std::uint32_t> owner;  // dish of each customer
  owner.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  const double sigma = params.sigma();
  for (std::int64_t t = 0; t < n; ++t) {
    const double total = params.beta() + static_cast<double>(t);
    const double u = stream.uniform() * total;
    const double w_new = params.new_cluster_weight(counts.size());
    std::uint32_t j;
    if (t == 0 || u < w_new) {
      j = static_cast<std::uint32_t>(counts.size());
      counts.push_back(0);
    } else {
      // Existing dish j has weight n_j - sigma. A uniform customer gives
      // weight n_j; sigma > 0 thins it by rejection, sigma < 0 adds a uniform
      // dish with the missing mass -k sigma.
      const double k = static_cast<double>(counts.size());
      if (sigma < 0.0 && stream.uniform() * (static_cast<double>(t) - k * sigma) >= static_cast<double>(t)) {
        j = static_cast<std::uint32_t>(stream.below(counts.size()));
      } else {
        for (;;) {
          j = owner[stream.below(owner.size())];
          if (sigma <= 0.0) break;
          const double keep = (static_cast<double>(counts[j]) - sigma) / static_cast<double>(counts[j]);
          if (stream.uniform() < keep) break;
        }
      }
    }
    ++counts[j];
    owner.push_back(j);
  }
  return counts;
}

}  // namespace epy
