// Copyright 2026 The LightDense Authors. All Rights Reserved.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lightdense {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model configuration, weight/config mismatch, bad shapes. CLI exit 3.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid runtime input (tensor values, image sizes, missing bindings). CLI exit 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes. Carries the byte offset where parsing failed. CLI exit 2.
class FormatError : public InputError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : InputError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lightdense
