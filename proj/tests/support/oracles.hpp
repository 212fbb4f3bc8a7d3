#pragma once

// Reference implementations written straight from the textbook definitions.
// They share no code with the library: slow, obvious, and used only to check
// the optimized paths.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

/// r <- s (r - 1) + a, applied from the last layer back to the input.
/// `layers` holds (kernel, stride) pairs ordered input -> output.
std::int64_t receptive_extent(const std::vector<std::pair<int, int>>& layers, int cells);

struct NaiveWindow {
  int scale, row, col;
  std::vector<float> descriptor;
};

/// Every M x M window for M = 1..n, max taken cell by cell over the window,
/// ordered by (scale, row, col). `map` is row, column, channel order.
std::vector<NaiveWindow> naive_mmp(std::span<const float> map, int n, int channels);

/// Plain diagonal Gaussian mixture for the Fisher oracle.
struct Mixture {
  std::vector<double> w;                       // K
  std::vector<std::vector<double>> mu, sigma;  // K x p
};

/// Raw Fisher block, term by term:
///   gamma_t(i) = w_i N(x_t; mu_i, sigma_i) / sum_j w_j N(x_t; mu_j, sigma_j)
///   mean part  (1 / sqrt(w_i))   sum_t gamma_t(i) (x_t - mu_i) / sigma_i
///   std part   (1 / sqrt(2 w_i)) sum_t gamma_t(i) ((x_t - mu_i)^2 / sigma_i^2 - 1)
/// laid out component by component, mean part then std part.
std::vector<double> fisher_block(const std::vector<std::vector<double>>& parts, const Mixture& gmm);

/// Plug-in mutual information (nats) of a discrete pair, no smoothing.
double plugin_mi(std::span<const int> x, std::span<const int> y);

/// Quantile binning by rank: value v falls in bin b when exactly b of the
/// thresholds sorted[floor(k n / bins)], k = 1..bins-1, are <= v (duplicates
/// counted once).
std::vector<int> quantile_bins(std::span<const float> values, int bins);

/// Cluster sums found by decoding each flat index into (group, component,
/// part, dim) with explicit loops over the layout.
std::vector<double> regroup_and_sum(std::span<const double> mi, int groups, int components, int dims);

/// L2-regularized squared-hinge primal, bias as an extra constant feature:
///   min 1/2 |w~|^2 + C sum_i max(0, 1 - y_i w~ . (x_i, 1))^2
/// by plain gradient descent with backtracking. Returns (w, b).
std::pair<std::vector<double>, double> squared_hinge_svm(const std::vector<std::vector<double>>& x,
                                                         const std::vector<int>& y, double C, int iterations = 20000);

double squared_hinge_primal(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double C,
                            const std::vector<double>& w, double b);

}  // namespace oracle
