#include "orca/script.h"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orca/eke.h"

namespace orca {

namespace {

struct OpInfo {
  ScriptOp op;
  const char* name;
  const char* p0;
  const char* p1;
};

constexpr OpInfo kOps[] = {
    {ScriptOp::ln, "ln", nullptr, nullptr},
    {ScriptOp::exp, "exp", nullptr, nullptr},
    {ScriptOp::fp, "fp", "C", "epsilon"},
    {ScriptOp::fp_inv, "fp_inv", "C", "epsilon"},
    {ScriptOp::standardize, "standardize", "mean", "std"},
    {ScriptOp::affine, "affine", "a", "b"},
    {ScriptOp::clamp, "clamp", "lo", "hi"},
};

const OpInfo&
op_info(ScriptOp op)
{
  for (const auto& i : kOps) {
    if (i.op == op) {
      return i;
    }
  }
  throw Error(ErrorCode::BadScript, "unknown op");
}

double
default_p0(ScriptOp op)
{
  switch (op) {
    case ScriptOp::fp:
    case ScriptOp::fp_inv: return eke::kDefaultC;
    case ScriptOp::affine: return 1.0;
    default: return 0.0;
  }
}

double
default_p1(ScriptOp op)
{
  switch (op) {
    case ScriptOp::fp:
    case ScriptOp::fp_inv: return eke::kDefaultEpsilon;
    case ScriptOp::standardize: return 1.0;
    default: return 0.0;
  }
}

std::string
describe(double v)
{
  std::ostringstream s;
  s << v;
  return s.str();
}

double
apply_step(const ScriptStep& st, double x)
{
  switch (st.op) {
    case ScriptOp::ln:
      if (!(x > 0.0)) {
        throw Error(ErrorCode::DomainError, "ln of non-positive value " + describe(x));
      }
      return std::log(x);
    case ScriptOp::exp:
      return std::exp(x);
    case ScriptOp::fp:
      return eke::fp(std::abs(x) < st.p1 ? 0.0 : x, st.p0);
    case ScriptOp::fp_inv:
      return eke::fp_inv(x, st.p0, st.p1);
    case ScriptOp::standardize:
      return (x - st.p0) / st.p1;
    case ScriptOp::affine:
      return st.p0 * x + st.p1;
    case ScriptOp::clamp:
      return x < st.p0 ? st.p0 : (x > st.p1 ? st.p1 : x);
  }
  return x;
}

}  // namespace

void
validate_script(const ScriptSpec& s)
{
  if (s.arity < 1) {
    throw Error(ErrorCode::BadScript, "arity must be >= 1");
  }
  if (s.finalize == Finalize::single && s.arity != 1) {
    throw Error(ErrorCode::BadScript, "finalize=single requires arity 1");
  }
  for (const auto& st : s.steps) {
    if (st.target && *st.target >= s.arity) {
      throw Error(
          ErrorCode::BadScript, "step target " + std::to_string(*st.target) +
                                    " >= arity " + std::to_string(s.arity));
    }
    if (st.op == ScriptOp::standardize && !(st.p1 > 0.0)) {
      throw Error(ErrorCode::DomainError, "standardize with non-positive std");
    }
    if (st.op == ScriptOp::clamp && st.p0 > st.p1) {
      throw Error(ErrorCode::BadScript, "clamp with lo > hi");
    }
  }
  if (s.output_dtype && *s.output_dtype != DType::f32 && *s.output_dtype != DType::f64) {
    throw Error(ErrorCode::BadScript, "output dtype must be f32 or f64");
  }
}

ScriptSpec
parse_script(std::string_view text)
{
  ScriptSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.name = j.value("name", std::string());
    s.arity = j.at("arity").get<uint32_t>();
    const std::string fin = j.value("finalize", std::string("single"));
    if (fin == "single") {
      s.finalize = Finalize::single;
    } else if (fin == "stack") {
      s.finalize = Finalize::stack_last_axis;
    } else {
      throw Error(ErrorCode::BadScript, "unknown finalize '" + fin + "'");
    }
    if (j.contains("output_dtype")) {
      const auto dt = dtype_from_name(j.at("output_dtype").get<std::string>());
      if (!dt) {
        throw Error(ErrorCode::BadScript, "unknown output_dtype");
      }
      s.output_dtype = dt;
    }
    for (const auto& js : j.value("steps", nlohmann::json::array())) {
      ScriptStep st;
      const auto target = js.value("target", nlohmann::json("all"));
      if (target.is_string()) {
        if (target.get<std::string>() != "all") {
          throw Error(ErrorCode::BadScript, "target must be an index or \"all\"");
        }
      } else {
        st.target = target.get<uint32_t>();
      }
      const std::string op = js.at("op").get<std::string>();
      const OpInfo* info = nullptr;
      for (const auto& i : kOps) {
        if (op == i.name) {
          info = &i;
        }
      }
      if (info == nullptr) {
        throw Error(ErrorCode::BadScript, "unknown op '" + op + "'");
      }
      st.op = info->op;
      st.p0 = info->p0 ? js.value(info->p0, default_p0(st.op)) : 0.0;
      st.p1 = info->p1 ? js.value(info->p1, default_p1(st.op)) : 0.0;
      s.steps.push_back(st);
    }
  }
  catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadScript, e.what());
  }
  validate_script(s);
  return s;
}

std::string
format_script(const ScriptSpec& s)
{
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["arity"] = s.arity;
  j["finalize"] = s.finalize == Finalize::single ? "single" : "stack";
  if (s.output_dtype) {
    j["output_dtype"] = dtype_name(*s.output_dtype);
  }
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& st : s.steps) {
    nlohmann::ordered_json js;
    if (st.target) {
      js["target"] = *st.target;
    } else {
      js["target"] = "all";
    }
    const auto& info = op_info(st.op);
    js["op"] = info.name;
    if (info.p0) js[info.p0] = st.p0;
    if (info.p1) js[info.p1] = st.p1;
    j["steps"].push_back(js);
  }
  return j.dump();
}

Tensor
run_script_exec(const ScriptSpec& s, std::span<const Tensor> inputs)
{
  if (inputs.size() != s.arity) {
    throw Error(
        ErrorCode::ArityMismatch, "script '" + s.name + "' takes " +
                                      std::to_string(s.arity) + " inputs, got " +
                                      std::to_string(inputs.size()));
  }
  const Shape& shape = inputs[0].shape();
  const DType in_dtype = inputs[0].dtype();
  for (const auto& t : inputs) {
    if (t.shape() != shape) {
      throw Error(ErrorCode::ShapeMismatch, "script inputs must share one shape");
    }
    if (t.dtype() != DType::f32 && t.dtype() != DType::f64) {
      throw Error(ErrorCode::DTypeMismatch, "script inputs must be f32 or f64");
    }
    if (t.dtype() != in_dtype) {
      throw Error(ErrorCode::DTypeMismatch, "script inputs must share one dtype");
    }
  }

  const size_t n = shape_elements(shape);
  std::vector<std::vector<double>> work(inputs.size());
  for (size_t k = 0; k < inputs.size(); ++k) {
    work[k].resize(n);
    for (size_t i = 0; i < n; ++i) {
      work[k][i] = inputs[k].as_double(i);
    }
  }
  for (const auto& st : s.steps) {
    for (size_t k = 0; k < work.size(); ++k) {
      if (st.target && *st.target != k) {
        continue;
      }
      for (double& v : work[k]) {
        v = apply_step(st, v);
      }
    }
  }

  Shape out_shape = shape;
  std::vector<double> out;
  if (s.finalize == Finalize::single) {
    out = std::move(work[0]);
  } else {
    if (out_shape.size() == kMaxDims) {
      throw Error(ErrorCode::BadShape, "stacking would exceed 8 dims");
    }
    const size_t k = work.size();
    out_shape.push_back(static_cast<uint32_t>(k));
    out.resize(n * k);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < k; ++j) {
        out[i * k + j] = work[j][i];
      }
    }
  }

  const DType out_dtype = s.output_dtype.value_or(in_dtype);
  if (out_dtype == DType::f64) {
    return Tensor::from_values<double>(std::move(out_shape), out);
  }
  std::vector<float> f(out.begin(), out.end());
  return Tensor::from_values<float>(std::move(out_shape), f);
}

}  // namespace orca
