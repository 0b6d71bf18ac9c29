#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orca/tensor.h"

namespace orca {

enum class ScriptOp { ln, exp, fp, fp_inv, standardize, affine, clamp };

struct ScriptStep {
  std::optional<uint32_t> target;  // nullopt applies to every input
  ScriptOp op = ScriptOp::affine;
  // ln, exp: unused. fp, fp_inv: (C, epsilon). standardize: (mean, std).
  // affine: (a, b) for a*x + b. clamp: (lo, hi).
  double p0 = 0.0;
  double p1 = 0.0;

  bool operator==(const ScriptStep&) const = default;
};

enum class Finalize { stack_last_axis, single };

// Elementwise preprocessing pipeline over `arity` equally-shaped inputs.
struct ScriptSpec {
  std::string name;
  uint32_t arity = 1;
  std::vector<ScriptStep> steps;
  Finalize finalize = Finalize::single;
  // Output dtype; defaults to the input dtype. Only f32/f64.
  std::optional<DType> output_dtype;

  bool operator==(const ScriptSpec&) const = default;
};

// Throws BadScript for malformed documents or broken invariants.
void validate_script(const ScriptSpec& s);
ScriptSpec parse_script(std::string_view text);
// Canonical JSON form (stable key order, shortest round-trip numbers).
std::string format_script(const ScriptSpec& s);

// Steps run in order on f64 copies of the inputs; finalize stacks along a new
// trailing axis (s -> s x arity) or passes the single input through.
// Throws ArityMismatch, ShapeMismatch, DTypeMismatch, DomainError.
Tensor run_script_exec(const ScriptSpec& s, std::span<const Tensor> inputs);

}  // namespace orca
