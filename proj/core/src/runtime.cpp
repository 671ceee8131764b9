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

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sndcr {

// Tensor buffers run to tens of MB; glibc would serve each from a fresh
// mmap and fault every page on every allocation. Keeping large chunks on
// the heap lets the allocator recycle them across graph rebuilds.
namespace {

struct MallocTuning {
  MallocTuning() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
  }
};

const MallocTuning g_malloc_tuning{};

}  // namespace

}  // namespace sndcr
