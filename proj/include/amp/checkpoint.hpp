// Copyright 2026 The amp-motion Authors
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


#ifndef AMP__CHECKPOINT_HPP_
#define AMP__CHECKPOINT_HPP_

#include "amp/model.hpp"

#include <string>

namespace amp
{

inline constexpr std::uint32_t kCheckpointVersion = 1;

/**
 * @brief Writes the model to a little-endian binary file.
 *
 * Layout: magic "AMPCKPT1", u32 version, u64 header length, header JSON
 * (model config text and anchors), u32 tensor count, then per tensor:
 * u32 name length, name bytes, u32 rank, rank x u64 dims, f64 values.
 */
void save_checkpoint(const AmpModel & model, const std::string & path);

/// Rebuilds the model from a checkpoint; ParseError on a malformed file.
AmpModel load_checkpoint(const std::string & path);

}  // namespace amp

#endif  // AMP__CHECKPOINT_HPP_
