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


#ifndef AMP__SVG_HPP_
#define AMP__SVG_HPP_

#include "amp/inference.hpp"
#include "amp/scene.hpp"

#include <string>
#include <vector>

namespace amp
{

/**
 * @brief Renders map polylines, ground-truth tracks and predicted modes as SVG.
 *
 * Each mode is one `<g class="mode">` group; waypoint colors run through a hue
 * ramp by time step and a group's opacity grows with its score. Output bytes
 * depend only on the inputs. Throws ValidationError when a prediction belongs
 * to another scene or to an agent the scene does not have.
 */
std::string render_svg(const SceneSample & scene, const std::vector<AgentPrediction> & predictions);

}  // namespace amp

#endif  // AMP__SVG_HPP_
