#include <doctest.h>

TEST_SUITE_BEGIN("pointcloud");

TEST_SUITE_END();
