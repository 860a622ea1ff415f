#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mtopt::linalg {

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double linf_norm(std::span<const double> a);

// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);

// Dense square solve A x = b via Gaussian elimination with partial pivoting.
// A is n x n row-major and is consumed. Returns false when the matrix is
// numerically singular (pivot below rel_tol * max|A|).
bool solve_dense(std::vector<double> a, std::vector<double> b, int n,
                 std::vector<double>& x, double rel_tol = 1e-12);

// Euclidean projection of v onto the probability simplex {x >= 0, sum x = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

}  // namespace mtopt::linalg
