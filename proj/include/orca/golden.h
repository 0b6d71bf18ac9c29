#pragma once

// Canonical request/response frames checked in under protocol/golden/.
// Any client implementation must encode these requests byte-for-byte and
// decode these responses to the documented values.

#include <string>
#include <vector>

#include "orca/bytes.h"

namespace orca::wire {

struct GoldenFrame {
  std::string name;  // file stem, e.g. "req_put_tensor"
  Bytes bytes;
};

std::vector<GoldenFrame> golden_frames();

}  // namespace orca::wire
