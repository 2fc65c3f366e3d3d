int main() {
    int x = 77;
    long long int y = (long long int)
    x * x * x;
    long long int z = y * y;
    unsigned int r = z / 1000;
    printf("Result %u\n", r);

    return 0;
}
