#pragma once

#include <functional>

#include <doctest.h>

#include "pad/error.hpp"

// Error code raised by f; fails the test when f returns normally.
inline pad::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const pad::Error& e) {
    return e.code();
  }
  FAIL("expected pad::Error");
  return pad::ErrorCode::kParse;
}
