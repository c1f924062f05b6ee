#pragma once

#include <cstddef>

#include "atp/matrix.hpp"
#include "atp/opcount.hpp"

namespace atp::ops {

// Shape-checked matrix operations over the dispatched kernels. Each call
// records its multiply/add tally on the counter when one is supplied; a null
// counter means uncounted utility work.

// c = a * b
Matrix matmul(const Matrix &a, const Matrix &b, OpCounter *counter = nullptr);
// c = a * b^T
Matrix matmul_nt(const Matrix &a, const Matrix &b, OpCounter *counter = nullptr);
// c = a^T * b
Matrix matmul_tn(const Matrix &a, const Matrix &b, OpCounter *counter = nullptr);

// y = a * x
void matvec(const Matrix &a, const double *x, double *y, OpCounter *counter = nullptr);
// y = a^T * x
void matvec_t(const Matrix &a, const double *x, double *y, OpCounter *counter = nullptr);

// a -= u * v^T
void rank1_sub(Matrix &a, const double *u, const double *v, OpCounter *counter = nullptr);

// Uncounted helpers.
Matrix transpose(const Matrix &a);
Matrix add(const Matrix &a, const Matrix &b);
Matrix sub(const Matrix &a, const Matrix &b);
double frob_norm(const Matrix &a);
double max_abs_diff(const Matrix &a, const Matrix &b);
double dot(const double *x, const double *y, std::size_t n);

} // namespace atp::ops
