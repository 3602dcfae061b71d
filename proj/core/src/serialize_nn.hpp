#pragma once

// json helpers for network checkpoints, shared by the value, dispatch and
// Q network serializers. Not installed; internal to the library build.

#include <json.hpp>

#include <Eigen/Dense>

#include "reposim/errors.hpp"
#include "reposim/nn.hpp"

namespace reposim::detail {

inline nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  j["data"] = std::move(a);
  return j;
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const nlohmann::json& a = j.at("data");
  if (static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw DataError("checkpoint matrix size mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[k++].get<double>();
  return m;
}

inline nlohmann::json stack_to_json(const nn::Stack& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const nn::Stack::Layer& l : s.layers()) {
    nlohmann::json jl;
    jl["in"] = l.W.cols();
    jl["out"] = l.W.rows();
    jl["act"] = l.act == nn::Act::kRelu ? "relu" : "linear";
    jl["W"] = mat_to_json(l.W);
    jl["b"] = vec_to_json(l.b);
    j.push_back(std::move(jl));
  }
  return j;
}

inline nn::Stack stack_from_json(const nlohmann::json& j) {
  nn::Stack s;
  for (const auto& jl : j) {
    std::string act = jl.at("act").get<std::string>();
    s.add_layer(jl.at("in").get<int>(), jl.at("out").get<int>(),
                act == "relu" ? nn::Act::kRelu : nn::Act::kLinear);
  }
  Eigen::VectorXd p(s.param_count());
  int pos = 0;
  for (const auto& jl : j) {
    Eigen::MatrixXd W = mat_from_json(jl.at("W"));
    Eigen::VectorXd b = vec_from_json(jl.at("b"));
    // Stack flat order is column-major within W
    Eigen::Map<Eigen::VectorXd>(p.data() + pos, W.size()) =
        Eigen::Map<const Eigen::VectorXd>(W.data(), W.size());
    pos += static_cast<int>(W.size());
    p.segment(pos, b.size()) = b;
    pos += static_cast<int>(b.size());
  }
  s.set_flat_params(p);
  return s;
}

}  // namespace reposim::detail
