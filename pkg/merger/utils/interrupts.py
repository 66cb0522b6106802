"""Interrupt handling utilities."""
import logging
import signal

logger = logging.getLogger(__name__)

# Global flag for interrupt handling
interrupted = False


def signal_handler(sig, frame):
    """Handle CTRL+C by letting the running batch stop at the next run boundary."""
    global interrupted
    if interrupted:
        raise KeyboardInterrupt
    interrupted = True
    logger.warning("\n⚠️  Interrupt received, stopping after the current run...")


def install_handler():
    """Install the SIGINT handler; returns the previous one."""
    reset()
    return signal.signal(signal.SIGINT, signal_handler)


def restore_handler(previous):
    if previous is not None:
        signal.signal(signal.SIGINT, previous)


def reset():
    global interrupted
    interrupted = False


def check_interrupt():
    """Raise KeyboardInterrupt once an interrupt has been requested."""
    if interrupted:
        raise KeyboardInterrupt("Batch interrupted by user")
