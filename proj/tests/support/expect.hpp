#pragma once

#include <gtest/gtest.h>

#include "spft/error.hpp"

// Passes when `stmt` throws spft::Error carrying `errc`.
#define EXPECT_ERRC(stmt, errc)                                    \
  do {                                                             \
    try {                                                          \
      stmt;                                                        \
      ADD_FAILURE() << "expected " #errc " from " #stmt;           \
    } catch (const ::spft::Error& spft_error_) {                   \
      EXPECT_EQ(spft_error_.code(), errc) << spft_error_.what();   \
    }                                                              \
  } while (0)
