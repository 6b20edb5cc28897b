// Placeholder acceptance binary; the criteria suite lands once the unit
// modules compile.
int main() { return 0; }
