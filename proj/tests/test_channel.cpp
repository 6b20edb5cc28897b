#include <doctest.h>

TEST_SUITE_BEGIN("channel");

TEST_SUITE_END();
