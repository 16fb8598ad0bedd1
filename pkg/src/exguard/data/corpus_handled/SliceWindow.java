import java.util.Arrays;

public class SliceWindow {
    public static void main(String[] args) {
        int[] values = {3, 1, 4, 1, 5, 9};
        try {
            int[] window = Arrays.copyOfRange(values, 2, 9);
        } catch (ArrayIndexOutOfBoundsException ex) {
            System.err.println("Index out of range: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("copy: " + Arrays.toString(window));
    }
}
