#pragma once

#include <cmath>
#include <vector>

namespace tcftl {

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = k < n - k ? k : n - k;
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

/// pmf[k] = C(n,k) p^k (1-p)^(n-k), k = 0..n.
inline std::vector<double> binomial_pmf(int n, double p) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 0; k <= n; ++k) pmf[k] = binomial_coefficient(n, k) * std::pow(p, k) * std::pow(1.0 - p, n - k);
    return pmf;
}

/// tail[m] = P(count >= m) for m = 0..n+1 given a count pmf over 0..n.
inline std::vector<double> suffix_sums(const std::vector<double>& pmf) {
    std::vector<double> tail(pmf.size() + 1, 0.0);
    for (std::size_t i = pmf.size(); i-- > 0;) tail[i] = tail[i + 1] + pmf[i];
    for (double& t : tail) t = t > 1.0 ? 1.0 : t;
    return tail;
}

/// sum_{k=m}^{n} C(n,k) p^k (1-p)^(n-k), unchecked.
inline double binomial_tail(double p, int m, int n) {
    if (m <= 0) return 1.0;
    if (m > n) return 0.0;
    double sum = 0.0;
    for (int k = m; k <= n; ++k) sum += binomial_coefficient(n, k) * std::pow(p, k) * std::pow(1.0 - p, n - k);
    return sum > 1.0 ? 1.0 : sum;
}

}  // namespace tcftl
