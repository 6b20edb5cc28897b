#include <doctest.h>

TEST_SUITE_BEGIN("branch");

TEST_SUITE_END();
