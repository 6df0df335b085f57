#include "icp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "icp/error.hpp"

namespace icp::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0;
    double sum = 0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0;
    const double m = mean(xs);
    double acc = 0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double coefficient_of_variation(std::span<const double> xs) {
    const double m = mean(xs);
    return m == 0 ? 0 : stddev(xs) / m;
}

double median(std::span<const double> xs) {
    if (xs.empty()) return 0;
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double r_squared(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw Error(ErrorCode::InvalidArgument, "r_squared needs paired samples");
    if (xs.size() < 3) return 1.0;
    const double mx = mean(xs);
    const double my = mean(ys);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0 || syy == 0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

}  // namespace icp::stats
