#include <doctest.h>

TEST_SUITE_BEGIN("training");

TEST_SUITE_END();
