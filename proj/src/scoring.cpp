// Copyright 2026 The dpasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dpasr/scoring.hpp"

#include <vector>

#include "dpasr/error.hpp"

namespace dpasr {

EditCounts &EditCounts::operator+=(const EditCounts &o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

EditCounts AlignTokens(std::span<const int> hyp, std::span<const int> ref) {
  const std::size_t n = ref.size(), m = hyp.size();
  // cost[i][j]: edits turning hyp[0..j) into ref[0..i)
  std::vector<int> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> int & { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = at(i - 1, j) + 1;
      const int ins = at(i, j - 1) + 1;
      at(i, j) = std::min({sub, del, ins});
    }

  EditCounts counts;
  counts.ref_length = static_cast<int>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const int match = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (at(i, j) == at(i - 1, j - 1) + match) {
        counts.substitutions += match;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double TokenErrorRate(std::span<const int> hyp, std::span<const int> ref) {
  DPASR_REQUIRE(!ref.empty(), "TokenErrorRate: empty reference");
  const EditCounts c = AlignTokens(hyp, ref);
  return static_cast<double>(c.errors()) / static_cast<double>(c.ref_length);
}

double CorpusTokenErrorRate(std::span<const TokenSequence> hyps,
                            std::span<const TokenSequence> refs) {
  DPASR_REQUIRE(hyps.size() == refs.size(), "CorpusTokenErrorRate: size mismatch");
  EditCounts total;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    DPASR_REQUIRE(!refs[k].empty(), "CorpusTokenErrorRate: empty reference");
    total += AlignTokens(hyps[k], refs[k]);
  }
  DPASR_REQUIRE(total.ref_length > 0, "CorpusTokenErrorRate: no references");
  return static_cast<double>(total.errors()) / static_cast<double>(total.ref_length);
}

}  // namespace dpasr
