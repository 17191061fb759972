#pragma once

#include "ahsnpe/flow.hpp"

namespace ahsnpe::detail {

struct MadeMasks {
  Matrix in;      // d x H
  Matrix hidden;  // H x H
  Matrix out;     // H x d
};

/// Autoregressive masks for one MAF transform; `reversed` flips the
/// coordinate order.
MadeMasks made_masks(int d, int hidden, bool reversed);

/// Position (1-based) of coordinate i in the autoregressive order.
inline int order_position(int i, int d, bool reversed) { return reversed ? d - i : i + 1; }

void add_maf_blocks(ParamLayout& layout, const EstimatorSpec& spec);
void add_mdn_blocks(ParamLayout& layout, const EstimatorSpec& spec);
void init_maf(const EstimatorSpec& spec, const ParamLayout& layout, Vector& params, Rng& rng, bool identity);
void init_mdn(const EstimatorSpec& spec, const ParamLayout& layout, Vector& params, Rng& rng);

/// Finds a block's node by name.
class BlockNodes {
 public:
  BlockNodes(const ParamLayout& layout, const std::vector<ad::Var>& nodes) : layout_(layout), nodes_(nodes) {}
  ad::Var operator()(const std::string& name) const;

 private:
  const ParamLayout& layout_;
  const std::vector<ad::Var>& nodes_;
};

/// Read-only view of a parameter block.
inline Eigen::Map<const Matrix> block_view(const ParamLayout& layout, const Vector& params, const std::string& name) {
  const auto& b = layout.block(name);
  return Eigen::Map<const Matrix>(params.data() + b.offset, b.rows, b.cols);
}

ad::Var maf_log_prob(ad::Tape& tape, const EstimatorSpec& spec, const BlockNodes& p, const Matrix& u, const Matrix& c);
ad::Var mdn_log_prob(ad::Tape& tape, const EstimatorSpec& spec, const BlockNodes& p, const Matrix& u, const Matrix& c);

/// Shift and log-scale of MAF transform k.
std::pair<Matrix, Matrix> made_outputs(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params,
                                       int k, const Matrix& u, const Matrix& c);
/// Standardized base variable -> standardized parameter.
Matrix maf_inverse(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params, const Matrix& z,
                   const Matrix& c);
/// Standardized base variable and per-row log-determinant of the flow.
std::pair<Matrix, Vector> maf_forward(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params,
                                      const Matrix& u, const Matrix& c);

/// n standardized draws at one standardized context row.
Matrix mdn_sample(const EstimatorSpec& spec, const ParamLayout& layout, const Vector& params, const RowVector& c,
                  Eigen::Index n, Rng& rng);

}  // namespace ahsnpe::detail
