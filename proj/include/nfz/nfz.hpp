// Copyright 2026 The Neurofuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NFZ_NFZ_HPP_
#define NFZ_NFZ_HPP_

#include "nfz/campaign.hpp"
#include "nfz/config.hpp"
#include "nfz/coverage.hpp"
#include "nfz/diversity.hpp"
#include "nfz/error.hpp"
#include "nfz/features.hpp"
#include "nfz/fixtures.hpp"
#include "nfz/fuzzer.hpp"
#include "nfz/image.hpp"
#include "nfz/model.hpp"
#include "nfz/mutation.hpp"
#include "nfz/nef.hpp"
#include "nfz/report.hpp"
#include "nfz/safety.hpp"

#endif  // NFZ_NFZ_HPP_
