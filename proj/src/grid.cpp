#include "sdgame/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sdgame {

namespace {

// Calls fn(offset) for every offset in {-1, 0, 1}^d other than zero.
template <class Fn>
void for_each_offset(int d, Fn&& fn) {
  int total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    LatticeIndex off{};
    int c = code;
    bool zero = true;
    for (int i = 0; i < d; ++i) {
      off[i] = c % 3 - 1;
      c /= 3;
      zero = zero && off[i] == 0;
    }
    if (!zero) fn(off);
  }
}

}  // namespace

DomainGrid::DomainGrid(DomainSpec domain, double h) : domain_(std::move(domain)) {
  if (!(h > 0.0)) throw ModelError("grid spacing must be positive");
  const int d = domain_.dim();
  origin_ = Vec::Zero(d);
  extent_.fill(1);
  h_.fill(h);

  if (domain_.shape() == DomainSpec::Shape::box) {
    const Vec lo = domain_.first();
    const Vec hi = domain_.second();
    for (int i = 0; i < d; ++i) {
      const int n = std::max(2, static_cast<int>(std::lround((hi[i] - lo[i]) / h)));
      h_[i] = (hi[i] - lo[i]) / n;
      extent_[i] = n + 1;
      origin_[i] = lo[i];
    }
  } else {
    const int m = static_cast<int>(std::ceil(domain_.radius() / h));
    for (int i = 0; i < d; ++i) {
      extent_[i] = 2 * m + 3;
      origin_[i] = domain_.first()[i] - (m + 1) * h;
    }
  }

  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(extent_[i]);
  if (total > 50'000'000) throw ModelError("grid too fine");

  // Classify every lattice point before numbering the active ones.
  std::vector<std::int8_t> inside(total, 0);
  auto unflatten = [&](std::size_t flat) {
    LatticeIndex p{};
    for (int i = 0; i < d; ++i) {
      p[i] = static_cast<int>(flat % extent_[i]);
      flat /= extent_[i];
    }
    return p;
  };
  auto point = [&](const LatticeIndex& p) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = origin_[i] + p[i] * h_[i];
    return x;
  };
  for (std::size_t flat = 0; flat < total; ++flat) {
    const LatticeIndex p = unflatten(flat);
    if (domain_.shape() == DomainSpec::Shape::box) {
      bool strict = true;
      for (int i = 0; i < d; ++i) strict = strict && p[i] > 0 && p[i] < extent_[i] - 1;
      inside[flat] = strict;
    } else {
      inside[flat] = domain_.contains(point(p));
    }
  }

  lattice_to_node_.assign(total, -1);
  for (std::size_t flat = 0; flat < total; ++flat) {
    const LatticeIndex p = unflatten(flat);
    bool active = inside[flat];
    NodeKind kind = NodeKind::interior;
    if (!active) {
      kind = NodeKind::boundary;
      for_each_offset(d, [&](const LatticeIndex& off) {
        LatticeIndex q = p;
        for (int i = 0; i < d; ++i) q[i] += off[i];
        const int f = flat_lattice(q);
        if (f >= 0 && inside[f]) active = true;
      });
    }
    if (!active) continue;
    const int node = static_cast<int>(kind_.size());
    lattice_to_node_[flat] = node;
    lattice_.push_back(p);
    kind_.push_back(kind);
    (kind == NodeKind::interior ? interior_ : boundary_).push_back(node);
  }
  if (interior_.empty()) throw ModelError("grid spacing leaves no interior node");
}

double DomainGrid::max_spacing() const {
  double m = 0.0;
  for (int i = 0; i < dim(); ++i) m = std::max(m, h_[i]);
  return m;
}

int DomainGrid::flat_lattice(const LatticeIndex& position) const {
  int flat = 0;
  int stride = 1;
  for (int i = 0; i < dim(); ++i) {
    if (position[i] < 0 || position[i] >= extent_[i]) return -1;
    flat += position[i] * stride;
    stride *= extent_[i];
  }
  return flat;
}

Vec DomainGrid::coordinates(int node) const {
  const LatticeIndex& p = lattice_[node];
  Vec x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = origin_[i] + p[i] * h_[i];
  return x;
}

int DomainGrid::node_at(const LatticeIndex& position) const {
  const int flat = flat_lattice(position);
  return flat < 0 ? -1 : lattice_to_node_[flat];
}

int DomainGrid::neighbor(int node, const LatticeIndex& offset) const {
  LatticeIndex p = lattice_[node];
  for (int i = 0; i < dim(); ++i) p[i] += offset[i];
  return node_at(p);
}

int DomainGrid::nearest_interior_node(const Vec& x) const {
  const int d = dim();
  LatticeIndex base{};
  for (int i = 0; i < d; ++i) {
    const long r = static_cast<long>(std::floor((x[i] - origin_[i]) / h_[i] + 0.5));
    base[i] = static_cast<int>(std::clamp<long>(r, 0, extent_[i] - 1));
  }
  int best = node_at(base);
  if (best >= 0 && is_interior(best)) return best;
  best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for_each_offset(d, [&](const LatticeIndex& off) {
    LatticeIndex q = base;
    for (int i = 0; i < d; ++i) q[i] += off[i];
    const int n = node_at(q);
    if (n < 0 || !is_interior(n)) return;
    const double dist = (coordinates(n) - x).squaredNorm();
    if (dist < best_dist) best_dist = dist, best = n;
  });
  return best;
}

double DomainGrid::interpolate(const std::vector<double>& values, const Vec& x) const {
  const int d = dim();
  LatticeIndex base{};
  std::array<double, kMaxDim> frac{};
  for (int i = 0; i < d; ++i) {
    const double s = (x[i] - origin_[i]) / h_[i];
    const int cell = std::clamp(static_cast<int>(std::floor(s)), 0, extent_[i] - 2);
    base[i] = cell;
    frac[i] = std::clamp(s - cell, 0.0, 1.0);
  }
  double sum = 0.0;
  double fallback_weight = -1.0;
  double fallback_value = std::numeric_limits<double>::quiet_NaN();
  bool complete = true;
  for (int corner = 0; corner < (1 << d); ++corner) {
    LatticeIndex q = base;
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      const bool up = (corner >> i) & 1;
      q[i] += up;
      w *= up ? frac[i] : 1.0 - frac[i];
    }
    const int n = node_at(q);
    if (n < 0) {
      complete = false;
      continue;
    }
    sum += w * values[n];
    if (w > fallback_weight) fallback_weight = w, fallback_value = values[n];
  }
  if (complete) return sum;
  if (fallback_weight < 0.0) throw std::out_of_range("interpolation point lies away from the grid");
  return fallback_value;
}

double DomainGrid::max_boundary_offset() const {
  double m = 0.0;
  for (int n : boundary_) m = std::max(m, std::abs(domain_.boundary_distance(coordinates(n))));
  return m;
}

ValueField::ValueField(std::shared_ptr<const DomainGrid> grid, double fill)
    : grid_(std::move(grid)), values_(static_cast<std::size_t>(grid_->node_count()), fill) {}

ValueField::ValueField(std::shared_ptr<const DomainGrid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (static_cast<int>(values_.size()) != grid_->node_count())
    throw std::invalid_argument("value count differs from grid node count");
}

double ValueField::sup_distance(const ValueField& other) const {
  if (other.size() != size()) throw std::invalid_argument("fields live on different grids");
  double m = 0.0;
  for (int i = 0; i < size(); ++i) m = std::max(m, std::abs(values_[i] - other.values_[i]));
  return m;
}

ValueField sample(std::shared_ptr<const DomainGrid> grid, const ScalarField& field) {
  ValueField out(grid);
  for (int n = 0; n < grid->node_count(); ++n) out[n] = field(grid->coordinates(n));
  return out;
}

void write_csv(std::ostream& out, const ValueField& field) {
  const DomainGrid& grid = field.grid();
  for (int i = 0; i < grid.dim(); ++i) out << 'x' << (i + 1) << ',';
  out << "value\n";
  for (int n = 0; n < grid.node_count(); ++n) {
    const Vec x = grid.coordinates(n);
    for (int i = 0; i < grid.dim(); ++i) out << format_double(x[i]) << ',';
    out << format_double(field[n]) << '\n';
  }
}

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

}  // namespace sdgame
