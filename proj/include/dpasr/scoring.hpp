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

#ifndef DPASR_SCORING_HPP_
#define DPASR_SCORING_HPP_

#include <span>

#include "dpasr/audio_synth.hpp"

namespace dpasr {

struct EditCounts {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;
  int errors() const { return substitutions + deletions + insertions; }
  EditCounts &operator+=(const EditCounts &o);
};

/// Minimum unit-cost alignment of hyp against ref. On the backtrace, ties are
/// broken substitution (or match) first, then deletion, then insertion.
EditCounts AlignTokens(std::span<const int> hyp, std::span<const int> ref);

/// (S + D + I) / |ref|. May exceed 1. Throws on an empty reference.
double TokenErrorRate(std::span<const int> hyp, std::span<const int> ref);

/// Corpus-level rate: total errors over total reference length.
double CorpusTokenErrorRate(std::span<const TokenSequence> hyps, std::span<const TokenSequence> refs);

}  // namespace dpasr

#endif  // DPASR_SCORING_HPP_
