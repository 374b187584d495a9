// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#pragma once

#include <cstddef>

#include "eraloc/ad/tape.hpp"

namespace eraloc::ad {

// Matrix-view ops: rows = product of leading dims, cols = last dim.

/// [r x k] * [k x c] -> [r x c].
Var matmul(Var a, Var b);
/// x W + bias, bias broadcast over rows.
Var linear(Var x, Var weight, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

/// x[r, :] + v for every row; v has x.cols() elements.
Var add_row_broadcast(Var x, Var v);
/// x[r, :] + table[r mod period, :]; table is [period x cols].
Var add_periodic_rows(Var x, Var table);
/// Repeats a single-row tensor `rows` times.
Var broadcast_rows(Var v, std::size_t rows);

Var tanh(Var x);
Var sigmoid(Var x);
/// Tanh-approximation GELU.
Var gelu(Var x);

/// Softmax along the last axis with max subtraction.
Var softmax(Var x);

/// Row-wise layer normalization with learned gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

/// Columns [start, start + count) of every row.
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var reshape(Var x, Shape shape);

/// Scaled dot-product attention over sequences of `seq_len` consecutive
/// rows. q, k, v are [(b * seq_len) x d_model]; the model dimension is split
/// into `heads` contiguous blocks. Returns concatenated head outputs.
Var attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t heads);

/// Pools each sequence of `seq_len` rows into one row using softmax weights
/// from scores x_l . query / sqrt(d). Returns [b x d].
Var attention_pool(Var x, Var query, std::size_t seq_len);

/// Splits each row into contiguous groups of `group` entries and rescales
/// every group to Euclidean norm `target`. Throws DegenerateInputError if a
/// group norm is <= eps.
Var normalize_groups(Var x, std::size_t group, double target, double eps = 1e-9);

/// Sum of all entries -> scalar.
Var sum(Var x);
/// Sum of squares of all entries -> scalar.
Var sum_squares(Var x);
/// Per-row sum of squares -> [rows x 1].
Var row_sum_squares(Var x);

}  // namespace eraloc::ad
