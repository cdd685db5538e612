#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/error.hpp"

namespace qdiff {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Finite stochastic variable: strictly increasing points with probabilities.
class DiscreteDistribution {
 public:
  static constexpr double kNormTolerance = 1e-12;

  DiscreteDistribution(std::vector<double> points, std::vector<double> probs)
      : points_(std::move(points)), probs_(std::move(probs)) {
    if (points_.empty() || points_.size() != probs_.size()) {
      throw PreconditionError("distribution needs equally many (nonzero) points and probabilities");
    }
    CompensatedSum total;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i]) || !std::isfinite(probs_[i])) {
        throw PreconditionError("distribution entries must be finite");
      }
      if (probs_[i] < 0) throw PreconditionError("probabilities must be nonnegative");
      if (i > 0 && !(points_[i] > points_[i - 1])) {
        throw PreconditionError("distribution points must be strictly increasing");
      }
      total.add(probs_[i]);
    }
    if (std::abs(total.value() - 1.0) > kNormTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "probabilities sum to " << total.value() << ", not 1";
      throw PreconditionError(msg.str());
    }
  }

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return points_.size(); }
  double max_abs_point() const { return std::max(std::abs(points_.front()), std::abs(points_.back())); }

 private:
  std::vector<double> points_;
  std::vector<double> probs_;
};

namespace detail {

inline DiscreteDistribution midpoint_grid(int levels, double truncation, bool gaussian) {
  if (levels < 1 || levels > 26) throw PreconditionError("levels must be in [1, 26]");
  if (!(truncation > 0)) throw PreconditionError("truncation must be positive");
  const std::size_t count = std::size_t{1} << levels;
  const double width = 2.0 * truncation / static_cast<double>(count);
  std::vector<double> points(count);
  std::vector<double> weights(count);
  CompensatedSum total;
  for (std::size_t i = 0; i < count; ++i) {
    points[i] = -truncation + (static_cast<double>(i) + 0.5) * width;
    weights[i] = gaussian ? std::exp(-0.5 * points[i] * points[i]) : 1.0;
    total.add(weights[i]);
  }
  const double norm = total.value();
  for (auto& w : weights) w /= norm;
  return DiscreteDistribution(std::move(points), std::move(weights));
}

}  // namespace detail

/// 2^levels cell midpoints on [-L, L], weighted by the standard normal density
/// and renormalised.
inline DiscreteDistribution discretize_standard_normal(int levels, double truncation) {
  return detail::midpoint_grid(levels, truncation, true);
}

/// 2^levels equiprobable cell midpoints on [-L, L].
inline DiscreteDistribution discretize_uniform(int levels, double truncation) {
  return detail::midpoint_grid(levels, truncation, false);
}

/// Reads "point,prob" rows; blank lines and lines starting with '#' are skipped.
inline DiscreteDistribution load_distribution_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open distribution file " + path);
  std::vector<double> points;
  std::vector<double> probs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw PreconditionError(path + ":" + std::to_string(line_no) + ": expected 'point,prob'");
    }
    try {
      points.push_back(std::stod(line.substr(0, comma)));
      probs.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw PreconditionError(path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  return DiscreteDistribution(std::move(points), std::move(probs));
}

/// sum_i p_i f(s_i), compensated. Throws on a non-finite f value.
template <typename Fn>
double expectation(const DiscreteDistribution& dist, Fn&& f) {
  CompensatedSum acc;
  const auto& pts = dist.points();
  const auto& ps = dist.probs();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double v = f(pts[i]);
    if (!std::isfinite(v)) {
      throw PreconditionError("integrand is not finite at s=" + std::to_string(pts[i]));
    }
    acc.add(ps[i] * v);
  }
  return acc.value();
}

}  // namespace qdiff
