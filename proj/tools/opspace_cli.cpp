// Placeholder main; grows into the full CLI once the library layers exist.
int main() { return 0; }
