#include <fcntl.h>

#include "detos/programs.hpp"

namespace detos {

GuestMain interleave_program(int steps_main, int steps_other, std::string path) {
  return [=](Guest& g) {
    int fd = g.open(path, O_CREAT | O_WRONLY | O_APPEND | O_TRUNC);
    g.assert_that(fd >= 0, "cannot create " + path);
    auto other = g.thread_create([=](Guest& t) {
      for (int i = 0; i < steps_other; ++i) {
        if (i > 0) t.interrupt_point();
        t.write(fd, "B");
      }
      return 0;
    });
    for (int i = 0; i < steps_main; ++i) {
      g.interrupt_point();
      g.write(fd, "A");
    }
    g.thread_join(other);
    g.close(fd);

    int in = g.open(path, O_RDONLY);
    auto order = g.read_text(in);
    g.close(in);
    g.write(1, order + "\n");
    return 0;
  };
}

namespace {

int racy_counter(Guest& g, bool locked) {
  int counter = 0;
  int m = g.mutex_create();
  auto bump = [&](Guest& t) {
    if (locked) t.mutex_lock(m);
    int seen = counter;
    t.interrupt_point();
    counter = seen + 1;
    if (locked) t.mutex_unlock(m);
    return 0;
  };
  auto worker = g.thread_create(bump);
  bump(g);
  g.thread_join(worker);
  g.write(1, "counter=" + std::to_string(counter) + "\n");
  g.assert_that(counter == 2, "lost update: counter is " + std::to_string(counter));
  return 0;
}

int deadlock_abba(Guest& g) {
  int a = g.mutex_create();
  int b = g.mutex_create();
  auto t = g.thread_create([=](Guest& x) {
    x.mutex_lock(b);
    x.mutex_lock(a);
    x.mutex_unlock(a);
    x.mutex_unlock(b);
    return 0;
  });
  g.mutex_lock(a);
  g.mutex_lock(b);
  g.mutex_unlock(b);
  g.mutex_unlock(a);
  g.thread_join(t);
  return 0;
}

// Terminates only if the setter is eventually scheduled.
int busywait(Guest& g) {
  bool flag = false;
  auto setter = g.thread_create([&](Guest&) {
    flag = true;
    return 0;
  });
  int spins = 0;
  while (!flag) {
    g.interrupt_point();
    ++spins;
  }
  g.thread_join(setter);
  g.write(1, "spins=" + std::to_string(spins) + "\n");
  return 0;
}

// One producer, one consumer, a one-slot buffer.
int condvar(Guest& g) {
  constexpr int kItems = 3;
  int m = g.mutex_create();
  int not_empty = g.cond_create();
  int not_full = g.cond_create();
  std::optional<int> slot;
  int total = 0;

  auto consumer = g.thread_create([&](Guest& c) {
    for (int i = 0; i < kItems; ++i) {
      c.mutex_lock(m);
      while (!slot) c.cond_wait(not_empty, m);
      total += *slot;
      slot.reset();
      c.cond_signal(not_full);
      c.mutex_unlock(m);
    }
    return 0;
  });
  for (int i = 1; i <= kItems; ++i) {
    g.mutex_lock(m);
    while (slot) g.cond_wait(not_full, m);
    slot = i;
    g.cond_signal(not_empty);
    g.mutex_unlock(m);
  }
  int rc = -1;
  g.thread_join(consumer, &rc);
  g.write(1, "total=" + std::to_string(total) + "\n");
  g.assert_that(total == kItems * (kItems + 1) / 2, "items lost");
  return rc;
}

int selfjoin(Guest& g) {
  g.thread_join(g.gettid());
  return 0;
}

int exit_values(Guest& g) {
  auto t = g.thread_create([](Guest&) { return 7; });
  int v = 0;
  g.thread_join(t, &v);
  g.write(1, "joined value " + std::to_string(v) + "\n");
  g.exit(v == 7 ? 3 : 1);
}

}  // namespace

void register_thread_programs(ProgramRegistry& r) {
  r.add({"interleave2x2", "two tasks, two appends each", interleave_program(2, 2), {}});
  r.add({"interleave2x3", "two tasks, three appends each", interleave_program(3, 3), {}});
  r.add({"counter", "unlocked read-interrupt-write increment by two tasks", [](Guest& g) { return racy_counter(g, false); },
         {}});
  r.add({"counter_locked", "the counter increment under a mutex", [](Guest& g) { return racy_counter(g, true); }, {}});
  r.add({"deadlock_abba", "two tasks taking two mutexes in opposite order", deadlock_abba, {}});
  Config fair;
  fair.scheduler = SchedulerKind::async_fair;
  r.add({"busywait", "spin on a flag set by another task", busywait, fair});
  r.add({"condvar", "producer/consumer over a one-slot buffer", condvar, {}});
  r.add({"selfjoin", "a task joining itself", selfjoin, {}});
  r.add({"exit_values", "thread exit value through join, then exit(3)", exit_values, {}});
}

}  // namespace detos
