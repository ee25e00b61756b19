#include <algorithm>

#include "epy/error.hpp"
#include "epy/urn.hpp"

namespace epy {

DiscoveryKernel::DiscoveryKernel(const NestedPartitionState& state, double alpha, PyParams new_family_params)
    : alpha_(alpha), fresh_(new_family_params) {
  if (!(alpha >= 0.0)) throw DomainError("DiscoveryKernel: alpha must be >= 0");
  if (alpha == 0.0 && state.n() == 0) throw DomainError("DiscoveryKernel: alpha == 0 needs a nonempty state");
  families_.reserve(state.k_x());
  owner_.reserve(static_cast<std::size_t>(state.n()));
  for (std::size_t r = 0; r < state.k_x(); ++r) {
    const auto& f = state.family(r);
    families_.push_back({static_cast<double>(f.count), static_cast<double>(f.k()), f.params});
    owner_.insert(owner_.end(), static_cast<std::size_t>(f.count), static_cast<std::uint32_t>(r));
  }
}

template <class OnStep>
void DiscoveryKernel::simulate(std::int64_t m, Stream& stream, OnStep&& on_step) const {
  std::vector<Family> fam = families_;
  fam.reserve(fam.size() + 64);
  std::vector<std::uint32_t> extra;
  extra.reserve(static_cast<std::size_t>(m));
  const std::size_t n0 = owner_.size();
  std::size_t total = n0;
  for (std::int64_t t = 0; t < m; ++t) {
    const double u = stream.uniform() * (alpha_ + static_cast<double>(total));
    bool new_family = false;
    bool new_species = false;
    std::uint32_t r;
    if (u < alpha_) {
      r = static_cast<std::uint32_t>(fam.size());
      fam.push_back({1.0, 1.0, fresh_});
      new_family = new_species = true;
    } else {
      auto c = static_cast<std::size_t>(u - alpha_);
      if (c >= total) c = total - 1;
      r = c < n0 ? owner_[c] : extra[c - n0];
      Family& f = fam[r];
      const double v = stream.uniform() * (f.params.beta() + f.n);
      if (v < f.params.new_cluster_weight(static_cast<std::size_t>(f.k))) {
        f.k += 1.0;
        new_species = true;
      }
      f.n += 1.0;
    }
    extra.push_back(r);
    ++total;
    on_step(t, new_family, new_species);
  }
}

void DiscoveryKernel::run(std::span<const std::int64_t> grid, Stream& stream, std::span<std::int64_t> new_species,
                          std::span<std::int64_t> new_families) const {
  if (new_species.size() != grid.size() || new_families.size() != grid.size())
    throw DomainError("DiscoveryKernel::run: output size mismatch");
  if (grid.empty()) return;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] < 0 || (i > 0 && grid[i] < grid[i - 1]))
      throw DomainError("DiscoveryKernel::run: grid must be nonnegative and nondecreasing");
  std::size_t gi = 0;
  std::int64_t ky = 0;
  std::int64_t kx = 0;
  while (gi < grid.size() && grid[gi] == 0) {
    new_species[gi] = 0;
    new_families[gi] = 0;
    ++gi;
  }
  simulate(grid.back(), stream, [&](std::int64_t t, bool nf, bool ns) {
    kx += nf;
    ky += ns;
    while (gi < grid.size() && grid[gi] == t + 1) {
      new_species[gi] = ky;
      new_families[gi] = kx;
      ++gi;
    }
  });
}

Discoveries DiscoveryKernel::run(std::int64_t m, Stream& stream, bool record_trajectory) const {
  if (m < 0) throw DomainError("DiscoveryKernel::run: m must be >= 0");
  Discoveries out;
  if (record_trajectory) out.trajectory.reserve(static_cast<std::size_t>(m));
  simulate(m, stream, [&](std::int64_t, bool nf, bool ns) {
    out.new_families += nf;
    out.new_species += ns;
    if (record_trajectory) out.trajectory.push_back({nf, ns});
  });
  return out;
}

}  // namespace epy
