public class PauseRetry {
    public static void main(String[] args) {
        long delayMillis = 250;
        try {
            Thread.sleep(delayMillis);
        } catch (InterruptedException ex) {
            System.err.println("Interrupted while waiting: " + ex.getMessage());
            Thread.currentThread().interrupt();
        }
        System.out.println("retrying after sleep");
    }
}
