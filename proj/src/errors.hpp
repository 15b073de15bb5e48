// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include "sardiff/sardiff.h"

namespace sardiff {

/// Base of every error raised by the core. Carries the C API status code so
/// the extern-C boundary can translate without a type switch.
class Error : public std::runtime_error {
 public:
  Error(sd_status code, const std::string& what) : std::runtime_error(what), code_(code) {}
  sd_status code() const noexcept { return code_; }

 private:
  sd_status code_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(SD_ERR_PARAMETER, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(SD_ERR_SHAPE, what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(SD_ERR_INDEX, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(SD_ERR_IO, what) {}
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what) : Error(SD_ERR_DECODE, what) {}
};

class EmptyDatasetError : public Error {
 public:
  explicit EmptyDatasetError(const std::string& what) : Error(SD_ERR_EMPTY_DATASET, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(SD_ERR_NUMERIC, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(SD_ERR_FORMAT, what) {}
};

class ScheduleMismatchError : public Error {
 public:
  explicit ScheduleMismatchError(const std::string& what)
      : Error(SD_ERR_SCHEDULE_MISMATCH, what) {}
};

}  // namespace sardiff
