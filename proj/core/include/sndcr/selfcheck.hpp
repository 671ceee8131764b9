// Copyright (c) 2026 The sndcr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sndcr {

struct SelfCheckOptions {
  bool quick = false;
  /// Test hook: name of a check whose computation is deliberately corrupted
  /// so the harness can verify the suite catches broken implementations.
  std::string corrupt;
};

struct SelfCheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the fast invariant suite (closed-form losses, gradient checks,
/// Gram/SVD/entropy oracles, shape arithmetic, schedule points) and prints
/// one pass/fail line per check. Returns all results; the CLI exits 0 iff
/// every check passed.
std::vector<SelfCheckResult> run_selfcheck(const SelfCheckOptions& opts,
                                           std::ostream& out);

}  // namespace sndcr
