#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace corrloc {

inline constexpr int kMaxDim = 3;

/// A site of Z^d, d <= 3. Unused trailing coordinates are zero.
using Point = std::array<int, kMaxDim>;

Point operator+(const Point& a, const Point& b);
Point operator-(const Point& a, const Point& b);
Point operator-(const Point& a);

/// Euclidean norm |x|.
double norm(const Point& x);
/// l^1 norm |x|_1.
int norm1(const Point& x);
/// The 2d unit vectors +-e_i, in lexicographic order.
std::vector<Point> unit_vectors(int dim);
std::string to_string(const Point& x, int dim);

/// Side of the box Q_a = [-floor(a/2), floor(a/2)]^d, always odd.
int odd_side(double a);

/// Axis-aligned cube of odd side centred at a lattice point. Sites are
/// indexed in row-major order with the first coordinate varying slowest, so
/// index order coincides with lexicographic order on coordinates.
class Box {
 public:
  Box() = default;
  Box(int dim, int side, Point center = {});

  /// Q_{a,center} under the odd-side convention.
  static Box centered(int dim, double a, Point center = {});

  int dim() const { return dim_; }
  int side() const { return side_; }
  int half() const { return side_ / 2; }
  const Point& center() const { return center_; }
  std::size_t size() const { return size_; }

  Point lower() const;
  Point upper() const;

  bool contains(const Point& x) const;
  bool contains(const Box& other) const;

  std::size_t index(const Point& x) const;
  Point point(std::size_t index) const;

  bool operator==(const Box& other) const = default;

 private:
  int dim_ = 1;
  int side_ = 1;
  Point center_{};
  std::size_t size_ = 1;
};

/// Real-valued function on the sites of a box.
struct Grid {
  Box box;
  std::vector<double> values;

  Grid() = default;
  explicit Grid(Box b, double fill = 0.0) : box(b), values(b.size(), fill) {}
  Grid(Box b, std::vector<double> v);

  double& at(const Point& x) { return values[box.index(x)]; }
  double at(const Point& x) const { return values[box.index(x)]; }
  /// Value at x, or zero outside the box (Dirichlet extension).
  double value_or_zero(const Point& x) const;

  std::span<const double> span() const { return values; }
  std::size_t size() const { return values.size(); }
};

/// Restriction of a grid to a sub-box.
Grid restrict_to(const Grid& grid, const Box& sub);

/// Index of the largest value; ties resolved towards the smallest index.
std::size_t argmax(std::span<const double> values);

}  // namespace corrloc
