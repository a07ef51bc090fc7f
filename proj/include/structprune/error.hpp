/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef STRUCTPRUNE_ERROR_HPP_
#define STRUCTPRUNE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace structprune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A model failed validation. `node()` names the offending layer when known.
class ModelError : public Error {
 public:
  ModelError(std::string node, const std::string& what)
      : Error(node.empty() ? what : "node '" + node + "': " + what),
        node_(std::move(node)) {}

  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

class FormatError : public ModelError {
 public:
  using ModelError::ModelError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

}  // namespace structprune

#endif  // STRUCTPRUNE_ERROR_HPP_
