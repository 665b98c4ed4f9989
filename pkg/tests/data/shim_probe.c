/* Allocate, pattern-fill, verify, resize, and free; pauses on stdin after
 * the first allocation so a harness can inspect side effects mid-run. The
 * observable behavior (stdout, exit code) must not depend on which
 * allocator serves the requests. */
#include <stdio.h>
#include <stdlib.h>

int main(void)
{
    size_t n = 10 * 1000 * 1000;
    size_t i;
    unsigned long sum = 0;
    unsigned char *p, *q;

    free(NULL);

    p = malloc(n);
    if (!p)
        return 1;
    for (i = 0; i < n; i++)
        p[i] = (unsigned char)(i * 31 + 7);
    printf("ALLOCATED\n");
    fflush(stdout);
    getchar();

    for (i = 0; i < n; i++)
        sum += p[i];
    printf("SUM %lu\n", sum);

    p = realloc(p, 12 * 1000 * 1000);
    if (!p)
        return 2;
    for (i = 0; i < n; i++) {
        if (p[i] != (unsigned char)(i * 31 + 7)) {
            printf("PREFIX BAD\n");
            return 3;
        }
    }
    printf("PREFIX OK\n");

    /* shrink back out of the large-allocation regime */
    p = realloc(p, 4096);
    if (!p)
        return 4;
    for (i = 0; i < 4096; i++) {
        if (p[i] != (unsigned char)(i * 31 + 7)) {
            printf("SHRINK BAD\n");
            return 5;
        }
    }
    printf("SHRINK OK\n");

    q = calloc(4 * 1000 * 1000, 1);
    if (!q)
        return 6;
    for (i = 0; i < 4 * 1000 * 1000; i++) {
        if (q[i]) {
            printf("NOT ZERO\n");
            return 7;
        }
    }
    printf("ZEROED OK\n");

    free(q);
    free(p);
    printf("DONE\n");
    return 0;
}
