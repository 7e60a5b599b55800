// Copyright 2026 The trirec Authors
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

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trirec::text {

/// Lowercases, splits on non-alphanumeric characters and drops tokens
/// shorter than three characters. Order of first appearance is kept.
std::vector<std::string> tokenize(std::string_view text);

std::set<std::string> token_set(std::string_view text);

/// |a ∩ b| / |a ∪ b|, defined as 0 when either side is empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Distinct tokens in order of first appearance, at most `limit` of them.
std::vector<std::string> leading_tokens(std::string_view text, std::size_t limit);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace trirec::text
