// Copyright 2026 The CloudSeed Authors
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

#ifndef CLOUDSEED__PLATFORM_HPP_
#define CLOUDSEED__PLATFORM_HPP_

namespace cloudseed
{

/// Keeps large freed blocks in the heap instead of returning them to the OS after every
/// training step. No-op where the allocator has no such knobs.
void tune_allocator();

}  // namespace cloudseed

#endif  // CLOUDSEED__PLATFORM_HPP_
