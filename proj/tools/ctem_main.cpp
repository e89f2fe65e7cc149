#include <cstdio>
int main() { std::puts("ctem cli placeholder"); return 0; }
