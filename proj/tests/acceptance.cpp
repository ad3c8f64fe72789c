// Acceptance suite placeholder: filled in once all modules are calibrated.
#include <cstdio>
int main() {
    std::puts("acceptance suite not yet implemented");
    return 1;
}
