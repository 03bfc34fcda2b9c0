// Copyright 2026 The ENorm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENORM_ERRORS_HPP_
#define ENORM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace enorm {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A hidden neuron/channel has a zero incoming or outgoing weight norm.
class DisconnectedNeuronError : public Error {
 public:
  DisconnectedNeuronError(const std::string& what, std::size_t boundary,
                          std::size_t channel)
      : Error(what), boundary_(boundary), channel_(channel) {}

  std::size_t boundary() const noexcept { return boundary_; }
  std::size_t channel() const noexcept { return channel_; }

 private:
  std::size_t boundary_;
  std::size_t channel_;
};

// Training produced a non-finite loss, gradient or parameter.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Malformed network container, dataset file or run configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace enorm

#endif  // ENORM_ERRORS_HPP_
