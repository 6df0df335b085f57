#pragma once

#include <span>

namespace icp::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);
double coefficient_of_variation(std::span<const double> xs);
double median(std::span<const double> xs);

// Coefficient of determination of the least-squares line y ~ a + b*x.
// Fewer than three points, or no spread in x, count as a perfect fit.
double r_squared(std::span<const double> xs, std::span<const double> ys);

}  // namespace icp::stats
