/*
 * LD_PRELOAD allocator shim: route large allocations of unmodified
 * binaries into file-backed mappings under a shared store directory.
 *
 * Exported symbols: malloc, free, calloc, realloc. Allocations at or
 * above REMEM_THRESHOLD bytes (default 1 MiB) become a mapping of
 * <root>/alloc-<id>/data.bin (plus meta.json) in the same on-disk layout
 * the Python store reads; everything else delegates to the next
 * allocator in the resolution chain.
 *
 * Environment:
 *   REMEM_ENABLE=1       activate routing (anything else: pure delegate)
 *   REMEM_VFS_ROOT=DIR   store root (required for routing)
 *   REMEM_THRESHOLD=N    routing threshold in bytes
 *   REMEM_LOG=FILE       append one line per shim event
 *
 * Internal bookkeeping never calls the intercepted entry points: early
 * allocations (dlsym itself calls calloc) come from a static arena, the
 * allocation table is a fixed-capacity array, and the table lock is
 * never held across filesystem work.
 */

#define _GNU_SOURCE

#include <dlfcn.h>
#include <errno.h>
#include <fcntl.h>
#include <limits.h>
#include <pthread.h>
#include <stdarg.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <time.h>
#include <unistd.h>

#define SHIM_MAX_ALLOCS 4096
#define SHIM_META_PAGE_SIZE 1048576ULL
#define SHIM_FORMAT_VERSION 1

/* Derived-path buffers grow along the chain root -> dir -> file so that
 * fortified snprintf can prove no truncation. The root itself is capped
 * well below PATH_MAX at init. */
#define DIR_BUF (PATH_MAX + 32)
#define FILE_BUF (PATH_MAX + 64)

extern size_t malloc_usable_size(void *ptr);

typedef void *(*malloc_fn)(size_t);
typedef void (*free_fn)(void *);
typedef void *(*calloc_fn)(size_t, size_t);
typedef void *(*realloc_fn)(void *, size_t);

static malloc_fn real_malloc;
static free_fn real_free;
static calloc_fn real_calloc;
static realloc_fn real_realloc;

/* Bootstrap arena: serves allocations made while dlsym resolves the real
 * allocator. Blocks carry a size header and are never reused. */
static char boot_heap[65536] __attribute__((aligned(16)));
static size_t boot_used;

static int shim_ready;      /* real_* resolved */
static int shim_enabled;    /* env said yes and the root checked out */
static size_t shim_threshold = 1048576;
static char shim_root[PATH_MAX];
static int shim_log_fd = -1;
static uint64_t shim_next_id = 1;

struct shim_alloc {
    void *addr;
    size_t size;
    uint64_t id;
};

static struct shim_alloc shim_table[SHIM_MAX_ALLOCS];
static int shim_table_count;
static pthread_mutex_t shim_lock = PTHREAD_MUTEX_INITIALIZER;

static void shim_log(const char *fmt, ...)
{
    char buf[512];
    va_list ap;
    int n;

    if (shim_log_fd < 0)
        return;
    va_start(ap, fmt);
    n = vsnprintf(buf, sizeof(buf) - 1, fmt, ap);
    va_end(ap);
    if (n < 0)
        return;
    if ((size_t)n >= sizeof(buf) - 1)
        n = sizeof(buf) - 2;
    buf[n] = '\n';
    if (write(shim_log_fd, buf, (size_t)n + 1) < 0) {
        /* nothing sensible to do */
    }
}

static void *boot_alloc(size_t size, int zero)
{
    size_t need = (size + 15 + sizeof(uint64_t)) & ~(size_t)15;
    char *block;

    if (boot_used + need > sizeof(boot_heap))
        return NULL;
    block = boot_heap + boot_used;
    boot_used += need;
    *(uint64_t *)block = size;
    block += sizeof(uint64_t);
    if (zero)
        memset(block, 0, size);
    return block;
}

static int is_boot_ptr(const void *ptr)
{
    return (const char *)ptr >= boot_heap &&
           (const char *)ptr < boot_heap + sizeof(boot_heap);
}

static size_t boot_size(const void *ptr)
{
    return *(const uint64_t *)((const char *)ptr - sizeof(uint64_t));
}

static void alloc_dir_path(char *buf, size_t len, uint64_t id)
{
    snprintf(buf, len, "%s/alloc-%llu", shim_root, (unsigned long long)id);
}

static void shim_init(void)
{
    const char *env;

    real_malloc = (malloc_fn)dlsym(RTLD_NEXT, "malloc");
    real_free = (free_fn)dlsym(RTLD_NEXT, "free");
    real_calloc = (calloc_fn)dlsym(RTLD_NEXT, "calloc");
    real_realloc = (realloc_fn)dlsym(RTLD_NEXT, "realloc");
    if (!real_malloc || !real_free || !real_calloc || !real_realloc)
        _exit(127); /* no allocator to stand on */

    env = getenv("REMEM_LOG");
    if (env && *env)
        shim_log_fd = open(env, O_WRONLY | O_CREAT | O_APPEND, 0644);

    env = getenv("REMEM_THRESHOLD");
    if (env && *env) {
        char *end = NULL;
        unsigned long long parsed = strtoull(env, &end, 10);
        long page = sysconf(_SC_PAGESIZE);
        if (end && *end == '\0' && parsed >= (unsigned long long)page)
            shim_threshold = (size_t)parsed;
        else
            shim_log("ignoring REMEM_THRESHOLD=%s", env);
    }

    env = getenv("REMEM_ENABLE");
    if (!env || strcmp(env, "1") != 0) {
        shim_ready = 1;
        return;
    }
    env = getenv("REMEM_VFS_ROOT");
    if (!env || !*env || strlen(env) >= sizeof(shim_root) - 64) {
        shim_log("REMEM_ENABLE=1 but no usable REMEM_VFS_ROOT; delegating");
        shim_ready = 1;
        return;
    }
    memcpy(shim_root, env, strlen(env) + 1);

    if (mkdir(shim_root, 0755) != 0 && errno != EEXIST) {
        shim_log("cannot create root %s: %s", shim_root, strerror(errno));
        shim_ready = 1;
        return;
    }

    /* Claim or validate the store format marker. */
    {
        char path[FILE_BUF];
        int fd;
        snprintf(path, sizeof(path), "%s/format_version", shim_root);
        fd = open(path, O_WRONLY | O_CREAT | O_EXCL, 0644);
        if (fd >= 0) {
            if (write(fd, "1\n", 2) != 2)
                shim_log("short write on %s", path);
            close(fd);
        } else if (errno == EEXIST) {
            char buf[16] = {0};
            fd = open(path, O_RDONLY);
            if (fd < 0 || read(fd, buf, sizeof(buf) - 1) < 1 || buf[0] != '1') {
                shim_log("incompatible store format at %s; delegating",
                         shim_root);
                if (fd >= 0)
                    close(fd);
                shim_ready = 1;
                return;
            }
            close(fd);
        } else {
            shim_log("cannot stamp %s: %s", path, strerror(errno));
            shim_ready = 1;
            return;
        }
    }

    shim_enabled = 1;
    shim_ready = 1;
    shim_log("enabled root=%s threshold=%zu", shim_root, shim_threshold);
}

static pthread_once_t shim_once = PTHREAD_ONCE_INIT;

static void ensure_init(void)
{
    pthread_once(&shim_once, shim_init);
}

static void iso8601_utc(char *buf, size_t len)
{
    struct timespec ts;
    struct tm tm;

    clock_gettime(CLOCK_REALTIME, &ts);
    gmtime_r(&ts.tv_sec, &tm);
    strftime(buf, len, "%Y-%m-%dT%H:%M:%SZ", &tm);
}

static int write_meta(const char *dir, uint64_t id, size_t size)
{
    char path[FILE_BUF];
    char meta[512];
    char stamp[64];
    int fd, n;

    iso8601_utc(stamp, sizeof(stamp));
    n = snprintf(meta, sizeof(meta),
                 "{\n"
                 "  \"format_version\": %d,\n"
                 "  \"alloc_id\": %llu,\n"
                 "  \"size_bytes\": %zu,\n"
                 "  \"page_size\": %llu,\n"
                 "  \"checksum_algo\": \"fnv1a64\",\n"
                 "  \"created_at\": \"%s\"\n"
                 "}\n",
                 SHIM_FORMAT_VERSION, (unsigned long long)id, size,
                 (unsigned long long)SHIM_META_PAGE_SIZE, stamp);
    if (n < 0 || (size_t)n >= sizeof(meta))
        return -1;
    snprintf(path, sizeof(path), "%s/meta.json", dir);
    fd = open(path, O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0)
        return -1;
    if (write(fd, meta, (size_t)n) != n) {
        close(fd);
        return -1;
    }
    close(fd);
    return 0;
}

static void remove_alloc_dir(const char *dir)
{
    char path[FILE_BUF];

    snprintf(path, sizeof(path), "%s/meta.json", dir);
    unlink(path);
    snprintf(path, sizeof(path), "%s/data.bin", dir);
    unlink(path);
    rmdir(dir);
}

/* Map a fresh store-backed allocation; returns NULL on any failure so the
 * caller can fall back to the delegate allocator. */
static void *shim_vfs_alloc(size_t size)
{
    char dir[DIR_BUF];
    char path[FILE_BUF];
    uint64_t id;
    int fd;
    void *addr;
    int slot;

    for (;;) {
        id = __sync_fetch_and_add(&shim_next_id, 1);
        if (id > (uint64_t)1 << 32)
            return NULL;
        alloc_dir_path(dir, sizeof(dir), id);
        if (mkdir(dir, 0755) == 0)
            break; /* atomic claim */
        if (errno != EEXIST)
            return NULL;
    }

    if (write_meta(dir, id, size) != 0)
        goto fail_dir;
    snprintf(path, sizeof(path), "%s/data.bin", dir);
    fd = open(path, O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd < 0)
        goto fail_dir;
    if (ftruncate(fd, (off_t)size) != 0) {
        close(fd);
        goto fail_dir;
    }
    addr = mmap(NULL, size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    close(fd);
    if (addr == MAP_FAILED)
        goto fail_dir;

    pthread_mutex_lock(&shim_lock);
    slot = shim_table_count < SHIM_MAX_ALLOCS ? shim_table_count++ : -1;
    if (slot >= 0) {
        shim_table[slot].addr = addr;
        shim_table[slot].size = size;
        shim_table[slot].id = id;
    }
    pthread_mutex_unlock(&shim_lock);
    if (slot < 0) {
        munmap(addr, size);
        shim_log("allocation table full; delegating %zu bytes", size);
        goto fail_dir;
    }
    shim_log("alloc id=%llu size=%zu at %p", (unsigned long long)id, size,
             addr);
    return addr;

fail_dir:
    remove_alloc_dir(dir);
    return NULL;
}

/* Pop the table entry for addr; returns 1 and fills *out when shim-owned. */
static int shim_take(const void *addr, struct shim_alloc *out)
{
    int i;

    pthread_mutex_lock(&shim_lock);
    for (i = 0; i < shim_table_count; i++) {
        if (shim_table[i].addr == addr) {
            *out = shim_table[i];
            shim_table[i] = shim_table[--shim_table_count];
            pthread_mutex_unlock(&shim_lock);
            return 1;
        }
    }
    pthread_mutex_unlock(&shim_lock);
    return 0;
}

static int shim_lookup(const void *addr, struct shim_alloc *out)
{
    int i;

    pthread_mutex_lock(&shim_lock);
    for (i = 0; i < shim_table_count; i++) {
        if (shim_table[i].addr == addr) {
            *out = shim_table[i];
            pthread_mutex_unlock(&shim_lock);
            return 1;
        }
    }
    pthread_mutex_unlock(&shim_lock);
    return 0;
}

void *malloc(size_t size)
{
    if (!shim_ready) {
        if (!real_malloc) {
            /* Re-entrant call during dlsym: serve from the arena. */
            void *p = boot_alloc(size, 0);
            if (p)
                return p;
        }
        ensure_init();
    }
    if (shim_enabled && size >= shim_threshold) {
        void *addr = shim_vfs_alloc(size);
        if (addr)
            return addr;
    }
    return real_malloc(size);
}

void free(void *ptr)
{
    struct shim_alloc entry;

    if (!ptr)
        return;
    if (is_boot_ptr(ptr))
        return;
    if (!shim_ready)
        ensure_init();
    if (shim_take(ptr, &entry)) {
        char dir[DIR_BUF];

        munmap(entry.addr, entry.size);
        alloc_dir_path(dir, sizeof(dir), entry.id);
        remove_alloc_dir(dir);
        shim_log("free id=%llu size=%zu", (unsigned long long)entry.id,
                 entry.size);
        return;
    }
    real_free(ptr);
}

void *calloc(size_t count, size_t elem_size)
{
    size_t total;

    if (count && elem_size > (size_t)-1 / count) {
        errno = ENOMEM;
        return NULL;
    }
    total = count * elem_size;
    if (!shim_ready && !real_calloc)
        return boot_alloc(total, 1);
    if (!shim_ready)
        ensure_init();
    if (shim_enabled && total >= shim_threshold) {
        /* mmap of a fresh file is already zero-filled */
        void *addr = shim_vfs_alloc(total);
        if (addr)
            return addr;
    }
    return real_calloc(count, elem_size);
}

void *realloc(void *ptr, size_t size)
{
    struct shim_alloc entry;
    size_t old_size;
    void *fresh;

    if (!shim_ready)
        ensure_init();
    if (!ptr)
        return malloc(size);
    if (size == 0) {
        free(ptr);
        return NULL;
    }

    if (is_boot_ptr(ptr))
        old_size = boot_size(ptr);
    else if (shim_lookup(ptr, &entry))
        old_size = entry.size;
    else if (!shim_enabled || size < shim_threshold)
        return real_realloc(ptr, size); /* delegated block staying delegated */
    else
        old_size = malloc_usable_size(ptr); /* delegated, migrating in */

    fresh = malloc(size);
    if (!fresh)
        return NULL; /* original untouched */
    memcpy(fresh, ptr, old_size < size ? old_size : size);
    free(ptr);
    return fresh;
}
