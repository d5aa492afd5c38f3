#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sdgame/game_model.hpp"
#include "sdgame/linalg.hpp"

namespace sdgame {

using LatticeIndex = std::array<int, kMaxDim>;

/// Uniform lattice over the bounding box of G. Only active nodes get a flat
/// index: interior nodes (strictly inside G) and the boundary ring (nodes
/// outside the open domain with an interior node among their 3^d
/// neighbours). Boxes put the ring exactly on the faces.
class DomainGrid {
 public:
  enum class NodeKind : std::uint8_t { interior, boundary };

  DomainGrid(DomainSpec domain, double h);

  int dim() const { return domain_.dim(); }
  const DomainSpec& domain() const { return domain_; }
  double spacing(int axis) const { return h_[axis]; }
  double max_spacing() const;

  int node_count() const { return static_cast<int>(kind_.size()); }
  NodeKind kind(int node) const { return kind_[node]; }
  bool is_interior(int node) const { return kind_[node] == NodeKind::interior; }
  const std::vector<int>& interior_nodes() const { return interior_; }
  const std::vector<int>& boundary_nodes() const { return boundary_; }

  Vec coordinates(int node) const;
  const LatticeIndex& lattice(int node) const { return lattice_[node]; }
  /// Flat index of the active node at a lattice position, or -1.
  int node_at(const LatticeIndex& position) const;
  int neighbor(int node, const LatticeIndex& offset) const;

  /// Nearest interior node to x, or -1 if x is not within one cell of one.
  int nearest_interior_node(const Vec& x) const;
  /// Multilinear interpolation of nodal values; cells with an inactive
  /// corner fall back to the nearest active corner.
  double interpolate(const std::vector<double>& values, const Vec& x) const;

  /// Largest distance from a boundary node to the boundary of G.
  double max_boundary_offset() const;

 private:
  int flat_lattice(const LatticeIndex& position) const;

  DomainSpec domain_;
  Vec origin_;
  std::array<double, kMaxDim> h_{};
  std::array<int, kMaxDim> extent_{};
  std::vector<int> lattice_to_node_;
  std::vector<LatticeIndex> lattice_;
  std::vector<NodeKind> kind_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
};

/// Scalar per active node of a shared grid.
class ValueField {
 public:
  explicit ValueField(std::shared_ptr<const DomainGrid> grid, double fill = 0.0);
  ValueField(std::shared_ptr<const DomainGrid> grid, std::vector<double> values);

  const DomainGrid& grid() const { return *grid_; }
  const std::shared_ptr<const DomainGrid>& grid_ptr() const { return grid_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int node) const { return values_[node]; }
  double& operator[](int node) { return values_[node]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double at(const Vec& x) const { return grid_->interpolate(values_, x); }
  double sup_distance(const ValueField& other) const;

 private:
  std::shared_ptr<const DomainGrid> grid_;
  std::vector<double> values_;
};

/// Samples `field` on every active node (Dirichlet data on the ring).
ValueField sample(std::shared_ptr<const DomainGrid> grid, const ScalarField& field);

/// Columns x1..xd,value with a header row.
void write_csv(std::ostream& out, const ValueField& field);

/// Fixed-format double used by every CSV writer: 12 significant digits.
std::string format_double(double value);

}  // namespace sdgame
