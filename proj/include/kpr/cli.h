// Copyright 2026 The kpr Authors.
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

#ifndef KPR_CLI_H_
#define KPR_CLI_H_

#include <iosfwd>

namespace kpr {

// Entry point of the kpr tool. Returns the process exit code: 0 on success,
// 1 for usage errors, 2 for bad input data, 3 for numeric failures.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace kpr

#endif  // KPR_CLI_H_
