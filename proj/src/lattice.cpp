#include "corrloc/lattice.hpp"

#include <cmath>
#include <sstream>

#include "corrloc/errors.hpp"

namespace corrloc {

Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Point operator-(const Point& a) { return {-a[0], -a[1], -a[2]}; }

double norm(const Point& x) {
  double s = 0.0;
  for (int c : x) s += static_cast<double>(c) * c;
  return std::sqrt(s);
}

int norm1(const Point& x) { return std::abs(x[0]) + std::abs(x[1]) + std::abs(x[2]); }

std::vector<Point> unit_vectors(int dim) {
  std::vector<Point> out;
  for (int i = 0; i < dim; ++i) {
    Point p{};
    p[i] = -1;
    out.push_back(p);
  }
  for (int i = dim - 1; i >= 0; --i) {
    Point p{};
    p[i] = 1;
    out.push_back(p);
  }
  return out;
}

std::string to_string(const Point& x, int dim) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << x[i];
  os << ')';
  return os.str();
}

int odd_side(double a) {
  if (!(a >= 0.0)) throw DomainError("box side must be non-negative");
  return 2 * static_cast<int>(std::floor(a / 2.0)) + 1;
}

Box::Box(int dim, int side, Point center) : dim_(dim), side_(side), center_(center) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("dimension must be in 1..3");
  if (side < 1 || side % 2 == 0) throw DomainError("box side must be a positive odd integer");
  for (int i = dim; i < kMaxDim; ++i) center_[i] = 0;
  size_ = 1;
  for (int i = 0; i < dim; ++i) size_ *= static_cast<std::size_t>(side);
}

Box Box::centered(int dim, double a, Point center) { return Box(dim, odd_side(a), center); }

Point Box::lower() const {
  Point p{};
  for (int i = 0; i < dim_; ++i) p[i] = center_[i] - half();
  return p;
}

Point Box::upper() const {
  Point p{};
  for (int i = 0; i < dim_; ++i) p[i] = center_[i] + half();
  return p;
}

bool Box::contains(const Point& x) const {
  for (int i = 0; i < dim_; ++i)
    if (std::abs(x[i] - center_[i]) > half()) return false;
  for (int i = dim_; i < kMaxDim; ++i)
    if (x[i] != 0) return false;
  return true;
}

bool Box::contains(const Box& other) const {
  return other.dim_ == dim_ && contains(other.lower()) && contains(other.upper());
}

std::size_t Box::index(const Point& x) const {
  std::size_t idx = 0;
  for (int i = 0; i < dim_; ++i)
    idx = idx * static_cast<std::size_t>(side_) +
          static_cast<std::size_t>(x[i] - center_[i] + half());
  return idx;
}

Point Box::point(std::size_t index) const {
  Point p{};
  for (int i = dim_ - 1; i >= 0; --i) {
    p[i] = static_cast<int>(index % static_cast<std::size_t>(side_)) - half() + center_[i];
    index /= static_cast<std::size_t>(side_);
  }
  return p;
}

Grid::Grid(Box b, std::vector<double> v) : box(b), values(std::move(v)) {
  if (values.size() != box.size()) throw DomainError("grid values do not match box size");
}

double Grid::value_or_zero(const Point& x) const {
  return box.contains(x) ? values[box.index(x)] : 0.0;
}

Grid restrict_to(const Grid& grid, const Box& sub) {
  if (!grid.box.contains(sub)) throw DomainError("sub-box exceeds grid box");
  Grid out(sub);
  for (std::size_t i = 0; i < sub.size(); ++i) out.values[i] = grid.at(sub.point(i));
  return out;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace corrloc
