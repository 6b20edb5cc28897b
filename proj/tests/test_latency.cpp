#include <doctest.h>

TEST_SUITE_BEGIN("latency");

TEST_SUITE_END();
