#pragma once

#include <Eigen/Core>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace csip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named parameter: a dense 64-bit float matrix with a same-shape
/// gradient slot. Vectors are stored as n-by-1, scalars as 1-by-1.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool touched = false;  // received gradient since the last zero_grad

  Tensor(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }

  void zero_grad() {
    grad.setZero();
    touched = false;
  }

  void accumulate(const Matrix& g) {
    grad += g;
    touched = true;
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::string name, Matrix value) {
  return std::make_shared<Tensor>(std::move(name), std::move(value));
}

enum class GroupTag { kEncoder, kTypedHead, kFreshHead, kBaselineHead };

inline const char* to_string(GroupTag tag) {
  switch (tag) {
    case GroupTag::kEncoder: return "encoder";
    case GroupTag::kTypedHead: return "typed-head";
    case GroupTag::kFreshHead: return "fresh-head";
    case GroupTag::kBaselineHead: return "baseline-head";
  }
  throw std::logic_error("unknown group tag");
}

inline GroupTag group_tag_from_string(const std::string& s) {
  if (s == "encoder") return GroupTag::kEncoder;
  if (s == "typed-head") return GroupTag::kTypedHead;
  if (s == "fresh-head") return GroupTag::kFreshHead;
  if (s == "baseline-head") return GroupTag::kBaselineHead;
  throw std::invalid_argument("unknown group tag: " + s);
}

/// Named tensors sharing one training role; tags are exhaustive and
/// mutually exclusive within a model.
struct ParamGroup {
  GroupTag tag;
  std::vector<TensorPtr> tensors;
};

}  // namespace csip
